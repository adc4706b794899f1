/** Pure payload-to-HTML renderers.
 *
 * Everything here is a string transform of /v1 responses: no scoring, no
 * threshold comparisons, no reordering of server-ranked lists.
 */

import type {
  Band,
  CohortResult,
  DemandRow,
  GradeReportView,
  QualityRow,
  QuizView,
  RecommendationView,
  ReminderView,
  UnitView,
} from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const BAND_MESSAGES: Record<Band, string> = {
  pass: "Pass: continue with the regular course material.",
  pass_with_remediation:
    "Pass with remediation: your foundation is solid; review the suggested units whenever it suits you.",
  fail: "Fail: key prerequisites are missing. Work through the assigned units, then take the follow-up evaluation.",
};

export function bandMessage(band: Band): string {
  return BAND_MESSAGES[band];
}

export function renderQuizForm(quiz: QuizView): string {
  const questions = quiz.questions
    .map((question, qIndex) => {
      const inputType = question.multiple ? "checkbox" : "radio";
      const choices = question.choices
        .map(
          (choice, cIndex) => `
      <label class="choice">
        <input type="${inputType}" name="${escapeHtml(question.id)}" value="${cIndex}">
        ${escapeHtml(choice)}
      </label>`,
        )
        .join("");
      return `
    <fieldset class="question" data-question-id="${escapeHtml(question.id)}">
      <legend>${qIndex + 1}. ${escapeHtml(question.stem)}</legend>${choices}
    </fieldset>`;
    })
    .join("");
  return `
  <form class="quiz" data-quiz-id="${escapeHtml(quiz.id)}">
    <p class="progress">0 of ${quiz.questions.length} answered</p>${questions}
    <button type="submit">Submit answers</button>
  </form>`;
}

export function renderGradeView(report: GradeReportView): string {
  const wrongConcepts = [
    ...new Set(report.wrong_answers.map((w) => w.concept_id)),
  ];
  const categories = wrongConcepts.length
    ? `<p class="wrong-categories">Needs attention: ${wrongConcepts
        .map(escapeHtml)
        .join(", ")}</p>`
    : "";
  const percent = report.score.toLocaleString("en", {
    style: "percent",
    maximumFractionDigits: 0,
  });
  return `
  <section class="grade-view band-${report.classification}">
    <p class="score">Score: ${percent}</p>
    <p class="band">${bandMessage(report.classification)}</p>${categories}
  </section>`;
}

export function renderRecommendationPanel(
  recommendation: RecommendationView,
  unitCatalog: Map<string, UnitView>,
): string {
  if (recommendation.units.length === 0) {
    return `<section class="recommendation empty"><p>No units to suggest.</p></section>`;
  }
  const items = recommendation.units
    .map((unitId) => {
      const unit = unitCatalog.get(unitId);
      const label = unit ? unit.title : unitId;
      const badges = unit
        ? `<span class="badge kind">${escapeHtml(unit.kind)}</span>` +
          `<span class="badge minutes">${unit.duration_minutes} min</span>`
        : "";
      return `
    <li class="unit" data-unit-id="${escapeHtml(unitId)}">${escapeHtml(label)}${badges}${renderFeedbackWidget(unitId)}</li>`;
    })
    .join("");
  return `
  <section class="recommendation">
    <h2>Recommended microlearning units</h2>
    <ol class="units">${items}
    </ol>
  </section>`;
}

export function renderReminderBanner(reminders: ReminderView[]): string {
  const active = reminders.filter((reminder) => reminder.status === "active");
  if (active.length === 0) return "";
  const next = active[0];
  return `
  <aside class="reminder-banner">
    Reminder: ${next.recommendation.units.length} unit(s) still waiting for you.
    Next nudge at ${escapeHtml(next.next_fire)}.
  </aside>`;
}

export function renderFeedbackWidget(unitId: string): string {
  const stars = [1, 2, 3, 4, 5]
    .map(
      (value) =>
        `<button class="star" data-unit-id="${escapeHtml(unitId)}" data-rating="${value}">${value}</button>`,
    )
    .join("");
  const tags = ["too_long", "unclear", "helpful", "outdated"]
    .map((tag) => `<option value="${tag}">${tag.replace("_", " ")}</option>`)
    .join("");
  return `
  <div class="feedback" data-unit-id="${escapeHtml(unitId)}">
    ${stars}
    <select class="tag"><option value="">reason (optional)</option>${tags}</select>
  </div>`;
}

export function renderDemandTable(rows: DemandRow[]): string {
  if (rows.length === 0) {
    return `<p class="empty-state">No recommendations logged yet.</p>`;
  }
  const body = rows
    .map(
      (row, index) => `
    <tr data-unit-id="${escapeHtml(row.unit_id)}">
      <td>${index + 1}</td><td>${escapeHtml(row.unit_id)}</td><td>${row.count}</td>
    </tr>`,
    )
    .join("");
  return `
  <table class="demand">
    <thead><tr><th>#</th><th>Unit</th><th>Recommendations</th></tr></thead>
    <tbody>${body}
    </tbody>
  </table>`;
}

export function renderQualityTable(rows: QualityRow[]): string {
  if (rows.length === 0) {
    return `<p class="empty-state">No demand or feedback yet.</p>`;
  }
  const body = rows
    .map((row) => {
      const rating = row.mean_rating === null ? "n/a" : row.mean_rating.toFixed(2);
      const badge =
        row.flag === "rework" ? `<span class="badge rework">rework</span>` : "";
      return `
    <tr data-unit-id="${escapeHtml(row.unit_id)}">
      <td>${row.demand_rank}</td><td>${escapeHtml(row.unit_id)}${badge}</td>
      <td>${row.recommendation_count}</td><td>${rating}</td>
    </tr>`;
    })
    .join("");
  return `
  <table class="quality">
    <thead><tr><th>Rank</th><th>Unit</th><th>Demand</th><th>Mean rating</th></tr></thead>
    <tbody>${body}
    </tbody>
  </table>`;
}

export function renderCohortSummary(result: CohortResult): string {
  return `
  <dl class="cohort">
    <dt>Mean difference</dt><dd>${result.mean_diff.toFixed(4)}</dd>
    <dt>Effect size</dt><dd>${result.effect_size.toFixed(4)}</dd>
    <dt>p-value</dt><dd>${result.p_value.toFixed(4)} (${result.method})</dd>
  </dl>`;
}
