/** Mirrors of the /v1 payloads this client consumes. */

export type Band = "fail" | "pass_with_remediation" | "pass";

export interface QuizQuestionView {
  id: string;
  stem: string;
  choices: string[];
  concept_id: string;
  multiple: boolean;
}

export interface QuizView {
  id: string;
  kind: "initial" | "follow_up" | "micro_test";
  thresholds: { min: number; max: number };
  questions: QuizQuestionView[];
}

export interface WrongAnswer {
  question_id: string;
  concept_id: string;
}

export interface GradeReportView {
  learner: string;
  quiz_id: string;
  score: number;
  score_exact: string;
  per_category: Record<string, string>;
  wrong_answers: WrongAnswer[];
  classification: Band;
}

export interface RecommendationView {
  learner: string;
  generated_at: string;
  triggering_concepts: string[];
  units: string[];
  origin: string;
}

export interface ReminderView {
  learner: string;
  recommendation: RecommendationView;
  interval_seconds: number;
  next_fire: string;
  cap: number;
  fired_count: number;
  status: "active" | "satisfied" | "expired";
  reminder_id?: string;
}

export interface LearnerStateView {
  learner: string;
  state:
    | "not_assessed"
    | "remediating"
    | "awaiting_follow_up"
    | "cleared_with_advice"
    | "cleared";
  assigned_units: string[];
  completed_units: string[];
  attempt_count: number;
  open_goal: string[];
  flagged_for_intervention: boolean;
  goal_unmet: boolean;
}

export interface SubmissionResponse {
  learner: string;
  report: GradeReportView;
  state: LearnerStateView;
  recommendation?: RecommendationView;
  reminder?: ReminderView;
}

export interface UnitView {
  id: string;
  title: string;
  covers: string[];
  kind: string;
  duration_minutes: number;
  content_uri: string;
  version: number;
}

export interface DemandRow {
  unit_id: string;
  count: number;
}

export interface QualityRow {
  unit_id: string;
  demand_rank: number;
  recommendation_count: number;
  mean_rating: number | null;
  rating_count: number;
  flag: "rework" | null;
}

export interface CohortResult {
  mean_diff: number;
  effect_size: number;
  p_value: number;
  u_statistic: number;
  method: "exact" | "normal_approximation";
}

export type Answers = Record<string, number[]>;
