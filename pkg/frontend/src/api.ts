/** Thin typed fetch wrapper over the /v1 API; all rendering happens elsewhere. */

import type {
  Answers,
  CohortResult,
  DemandRow,
  LearnerStateView,
  QualityRow,
  QuizView,
  ReminderView,
  SubmissionResponse,
  UnitView,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`API ${status}: ${detail}`);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface ApiClientOptions {
  baseUrl: string;
  learnerId?: string;
  role?: "instructor";
  fetchImpl?: FetchLike;
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly learnerId?: string;
  private readonly role?: string;
  private readonly fetchImpl: FetchLike;

  constructor(options: ApiClientOptions) {
    this.baseUrl = options.baseUrl.replace(/\/$/, "");
    this.learnerId = options.learnerId;
    this.role = options.role;
    this.fetchImpl = options.fetchImpl ?? fetch;
  }

  private headers(): Record<string, string> {
    const headers: Record<string, string> = {
      "Content-Type": "application/json",
    };
    if (this.learnerId) headers["X-Learner-Id"] = this.learnerId;
    if (this.role) headers["X-Role"] = this.role;
    return headers;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const data = (await response.json()) as T & { detail?: string };
    if (!response.ok) {
      throw new ApiError(response.status, data.detail ?? "request failed");
    }
    return data;
  }

  getQuiz(quizId: string): Promise<QuizView> {
    return this.request("GET", `/v1/quizzes/${quizId}`);
  }

  listUnits(): Promise<{ units: UnitView[] }> {
    return this.request("GET", "/v1/units");
  }

  submit(quizId: string, answers: Answers): Promise<SubmissionResponse> {
    return this.request("POST", "/v1/submissions", {
      quiz_id: quizId,
      answers,
    });
  }

  learnerState(pseudonym: string): Promise<LearnerStateView> {
    return this.request("GET", `/v1/learners/${pseudonym}/state`);
  }

  reminders(pseudonym: string): Promise<{ reminders: ReminderView[] }> {
    return this.request("GET", `/v1/learners/${pseudonym}/reminders`);
  }

  completeUnit(pseudonym: string, unitId: string): Promise<LearnerStateView> {
    return this.request("POST", `/v1/learners/${pseudonym}/completions`, {
      unit_id: unitId,
    });
  }

  sendFeedback(unitId: string, rating: number, tag?: string): Promise<unknown> {
    return this.request("POST", "/v1/feedback", {
      unit_id: unitId,
      rating,
      ...(tag ? { tag } : {}),
    });
  }

  demandReport(): Promise<{ rows: DemandRow[] }> {
    return this.request("GET", "/v1/reports/demand");
  }

  qualityReport(): Promise<{ rows: QualityRow[] }> {
    return this.request("GET", "/v1/reports/quality");
  }

  cohortCompare(a: number[], b: number[]): Promise<CohortResult> {
    return this.request("POST", "/v1/reports/cohort", { a, b });
  }
}
