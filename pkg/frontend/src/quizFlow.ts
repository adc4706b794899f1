/** Student quiz flow: load, collect answers, submit, render the verdict.
 *
 * A failed network submit keeps the answers in the pending slot so a retry
 * resubmits the exact same payload; nothing is graded or reordered locally.
 */

import type { ApiClient } from "./api.js";
import {
  renderGradeView,
  renderQuizForm,
  renderRecommendationPanel,
  renderReminderBanner,
} from "./render.js";
import type {
  Answers,
  QuizView,
  SubmissionResponse,
  UnitView,
} from "./types.js";

export interface QuizFlowView {
  phase: "answering" | "submitted" | "offline";
  html: string;
  error?: string;
}

export class QuizFlow {
  private quiz?: QuizView;
  private answers: Answers = {};
  private pending?: { quizId: string; answers: Answers };
  private unitCatalog = new Map<string, UnitView>();
  result?: SubmissionResponse;

  constructor(private readonly api: ApiClient) {}

  async load(quizId: string): Promise<QuizFlowView> {
    this.quiz = await this.api.getQuiz(quizId);
    const catalog = await this.api.listUnits();
    this.unitCatalog = new Map(catalog.units.map((unit) => [unit.id, unit]));
    this.answers = {};
    this.result = undefined;
    return { phase: "answering", html: renderQuizForm(this.quiz) };
  }

  setAnswer(questionId: string, choiceIndices: number[]): void {
    if (!this.quiz || !this.quiz.questions.some((q) => q.id === questionId)) {
      throw new Error(`unknown question ${questionId}`);
    }
    this.answers[questionId] = [...choiceIndices];
  }

  answeredCount(): number {
    return Object.keys(this.answers).length;
  }

  /** Submit current answers; on network failure retain them for retry. */
  async submit(): Promise<QuizFlowView> {
    if (!this.quiz) throw new Error("no quiz loaded");
    const payload = this.pending ?? {
      quizId: this.quiz.id,
      answers: { ...this.answers },
    };
    try {
      this.result = await this.api.submit(payload.quizId, payload.answers);
    } catch (error) {
      if (error instanceof Error && error.name === "ApiError") {
        throw error; // server rejected: not retryable as-is
      }
      this.pending = payload; // network failure: keep answers for retry
      return {
        phase: "offline",
        html: "",
        error: "Could not reach the server. Your answers are saved; retry when back online.",
      };
    }
    this.pending = undefined;
    return { phase: "submitted", html: this.renderResult() };
  }

  hasPendingSubmission(): boolean {
    return this.pending !== undefined;
  }

  pendingAnswers(): Answers | undefined {
    return this.pending?.answers;
  }

  private renderResult(): string {
    if (!this.result) return "";
    const parts = [renderGradeView(this.result.report)];
    if (this.result.recommendation) {
      parts.push(
        renderRecommendationPanel(this.result.recommendation, this.unitCatalog),
      );
    }
    if (this.result.reminder) {
      parts.push(renderReminderBanner([this.result.reminder]));
    }
    return parts.join("\n");
  }
}
