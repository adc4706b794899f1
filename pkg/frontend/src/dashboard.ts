/** Instructor dashboard: demand ranking, quality flags, cohort comparison.
 *
 * Tables render in exactly the order the report endpoints return.
 */

import type { ApiClient } from "./api.js";
import {
  renderCohortSummary,
  renderDemandTable,
  renderQualityTable,
} from "./render.js";

export interface DashboardView {
  demandHtml: string;
  qualityHtml: string;
  reworkUnitIds: string[];
}

export async function loadDashboard(api: ApiClient): Promise<DashboardView> {
  const [demand, quality] = await Promise.all([
    api.demandReport(),
    api.qualityReport(),
  ]);
  return {
    demandHtml: renderDemandTable(demand.rows),
    qualityHtml: renderQualityTable(quality.rows),
    reworkUnitIds: quality.rows
      .filter((row) => row.flag === "rework")
      .map((row) => row.unit_id),
  };
}

export async function compareCohorts(
  api: ApiClient,
  a: number[],
  b: number[],
): Promise<string> {
  const result = await api.cohortCompare(a, b);
  return renderCohortSummary(result);
}
