import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { QuizFlow } from "../src/quizFlow.js";
import { bandMessage } from "../src/render.js";
import type { SubmissionResponse } from "../src/types.js";
import {
  loadExchanges,
  startFixtureService,
  type FixtureService,
} from "./fixtureServer.js";

let service: FixtureService;

beforeAll(async () => {
  service = await startFixtureService();
});

afterAll(async () => {
  await service.close();
});

const exchanges = loadExchanges();
const recordedSubmissions = exchanges.filter(
  (exchange) => exchange.method === "POST" && exchange.path === "/v1/submissions",
);
const failing = recordedSubmissions.find(
  (exchange) =>
    (exchange.response as SubmissionResponse).report.classification === "fail",
)!;
const advice = recordedSubmissions.find(
  (exchange) =>
    (exchange.response as SubmissionResponse).report.classification ===
    "pass_with_remediation",
)!;

function answersOf(exchange: (typeof recordedSubmissions)[number]) {
  return (exchange.body as { answers: Record<string, number[]> }).answers;
}

function unitIdsInOrder(html: string): string[] {
  return [...html.matchAll(/<li class="unit" data-unit-id="([^"]+)"/g)].map(
    (match) => match[1],
  );
}

describe("quiz flow against the fixture service", () => {
  it("renders every question of the served quiz in order", async () => {
    const flow = new QuizFlow(new ApiClient({ baseUrl: service.baseUrl }));
    const view = await flow.load("ecg-initial");
    expect(view.phase).toBe("answering");
    const quiz = exchanges.find(
      (exchange) => exchange.path === "/v1/quizzes/ecg-initial",
    )!.response as { questions: { id: string; stem: string }[] };
    const positions = quiz.questions.map((question) =>
      view.html.indexOf(question.stem),
    );
    expect(positions.every((position) => position >= 0)).toBe(true);
    expect([...positions].sort((a, b) => a - b)).toEqual(positions);
  });

  it("failing run renders the fail band and units in server order", async () => {
    const flow = new QuizFlow(new ApiClient({ baseUrl: service.baseUrl }));
    await flow.load("ecg-initial");
    for (const [questionId, choice] of Object.entries(answersOf(failing))) {
      flow.setAnswer(questionId, choice);
    }
    const view = await flow.submit();
    expect(view.phase).toBe("submitted");
    expect(view.html).toContain(bandMessage("fail"));
    const expectedUnits = (failing.response as SubmissionResponse)
      .recommendation!.units;
    expect(unitIdsInOrder(view.html)).toEqual(expectedUnits);
  });

  it("pass-with-remediation run renders advice plus a reminder banner", async () => {
    const flow = new QuizFlow(new ApiClient({ baseUrl: service.baseUrl }));
    await flow.load("ecg-initial");
    for (const [questionId, choice] of Object.entries(answersOf(advice))) {
      flow.setAnswer(questionId, choice);
    }
    const view = await flow.submit();
    expect(view.phase).toBe("submitted");
    expect(view.html).toContain(bandMessage("pass_with_remediation"));
    expect(view.html).toContain("reminder-banner");
    const expectedUnits = (advice.response as SubmissionResponse)
      .recommendation!.units;
    expect(unitIdsInOrder(view.html)).toEqual(expectedUnits);
  });

  it("offline submit retains answers and resubmits on reconnect", async () => {
    let failNext = true;
    const flakyFetch: typeof fetch = (url, init) => {
      if (failNext && init?.method === "POST") {
        failNext = false;
        return Promise.reject(new TypeError("network down"));
      }
      return fetch(url, init);
    };
    const flow = new QuizFlow(
      new ApiClient({ baseUrl: service.baseUrl, fetchImpl: flakyFetch }),
    );
    await flow.load("ecg-initial");
    for (const [questionId, choice] of Object.entries(answersOf(failing))) {
      flow.setAnswer(questionId, choice);
    }
    const offline = await flow.submit();
    expect(offline.phase).toBe("offline");
    expect(flow.hasPendingSubmission()).toBe(true);
    expect(flow.pendingAnswers()).toEqual(answersOf(failing));

    const retried = await flow.submit();
    expect(retried.phase).toBe("submitted");
    expect(flow.hasPendingSubmission()).toBe(false);
    expect(retried.html).toContain(bandMessage("fail"));
  });

  it("rejects answers for unknown questions locally", async () => {
    const flow = new QuizFlow(new ApiClient({ baseUrl: service.baseUrl }));
    await flow.load("ecg-initial");
    expect(() => flow.setAnswer("ghost", [0])).toThrow(/unknown question/);
  });
});
