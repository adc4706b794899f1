/** Browser entry point: wires the quiz flow and dashboard into the page. */

import { ApiClient } from "./api.js";
import { loadDashboard } from "./dashboard.js";
import { QuizFlow } from "./quizFlow.js";

function queryParam(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

function collectAnswers(form: HTMLFormElement, flow: QuizFlow): void {
  for (const fieldset of form.querySelectorAll<HTMLElement>("[data-question-id]")) {
    const questionId = fieldset.dataset.questionId ?? "";
    const chosen = [
      ...fieldset.querySelectorAll<HTMLInputElement>("input:checked"),
    ].map((input) => Number(input.value));
    if (chosen.length > 0) flow.setAnswer(questionId, chosen);
  }
}

function wireFeedback(root: HTMLElement, api: ApiClient): void {
  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (!target.matches("button.star")) return;
    const unitId = target.dataset.unitId ?? "";
    const rating = Number(target.dataset.rating);
    const tag = target
      .closest(".feedback")
      ?.querySelector<HTMLSelectElement>("select.tag")?.value;
    void api.sendFeedback(unitId, rating, tag || undefined).then(() => {
      target.closest(".feedback")?.replaceChildren("Thanks for the feedback!");
    });
  });
}

async function bootStudent(root: HTMLElement, api: ApiClient): Promise<void> {
  const flow = new QuizFlow(api);
  const view = await flow.load(queryParam("quiz", "ecg-initial"));
  root.innerHTML = view.html;
  wireFeedback(root, api);
  const form = root.querySelector<HTMLFormElement>("form.quiz");
  form?.addEventListener("submit", (event) => {
    event.preventDefault();
    collectAnswers(form, flow);
    void flow.submit().then((submitted) => {
      if (submitted.phase === "offline") {
        root.insertAdjacentHTML(
          "beforebegin",
          `<p class="offline-note">${submitted.error}</p>`,
        );
        return;
      }
      root.innerHTML = submitted.html;
    });
  });
}

async function bootInstructor(root: HTMLElement, api: ApiClient): Promise<void> {
  const dashboard = await loadDashboard(api);
  root.innerHTML = `
    <h2>Unit demand</h2>${dashboard.demandHtml}
    <h2>Quality</h2>${dashboard.qualityHtml}`;
}

export async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) return;
  const role = queryParam("role", "student");
  const api = new ApiClient({
    baseUrl: queryParam("api", ""),
    learnerId: role === "student" ? queryParam("learner", "demo-student") : undefined,
    role: role === "instructor" ? "instructor" : undefined,
  });
  if (role === "instructor") {
    await bootInstructor(root, api);
  } else {
    await bootStudent(root, api);
  }
}

if (typeof document !== "undefined") {
  void boot();
}
