import { describe, expect, it } from "vitest";
import {
  AgreementResponse,
  ApiError,
  BucketStatsResponse,
} from "../src/api";
import { Dashboard } from "../src/dashboard";
import { FakeClient } from "./helpers";

function statsFixture(): BucketStatsResponse {
  return {
    stats: [
      {
        bucket: "Bronze",
        lower: 51.5,
        upper: 52.5,
        n_items: 2,
        relevance_pct: 50.0,
        agreement: 1.0,
      },
      {
        bucket: "Silver",
        lower: 52.5,
        upper: 53.5,
        n_items: 2,
        relevance_pct: 75.0,
        agreement: 0.5,
      },
      {
        bucket: "Gold",
        lower: 53.5,
        upper: 54.5,
        n_items: 2,
        relevance_pct: 80.0,
        agreement: null,
      },
      {
        bucket: "Platinum",
        lower: 54.5,
        upper: 55.5,
        n_items: 2,
        relevance_pct: 90.0,
        agreement: 1.0,
      },
      {
        bucket: "Diamond",
        lower: 55.5,
        upper: null,
        n_items: 2,
        relevance_pct: 100.0,
        agreement: 1.0,
      },
    ],
    recommended: {
      boundary: 54.5,
      rho: 0.545,
      buckets: ["Platinum", "Diamond"],
      warning: null,
    },
    target_relevance_pct: 85.0,
    unrated: ["gold-1"],
  };
}

function agreementFixture(): AgreementResponse {
  return {
    percent_agreement: 0.9,
    chance_corrected: 0.8,
    per_task: { bucket_relevance: 0.9 },
    n_ratings: 20,
  };
}

function setup() {
  const client = new FakeClient();
  client.statsResponse = statsFixture();
  client.agreementResponse = agreementFixture();
  const root = document.createElement("div");
  const dashboard = new Dashboard(root, client);
  return { client, root, dashboard };
}

describe("bucket bars", () => {
  it("draws one bar per bucket sized by the server's percentage", async () => {
    const { root, dashboard } = setup();
    await dashboard.refresh();
    const bars = root.querySelectorAll<HTMLElement>(".bar");
    expect(bars).toHaveLength(5);
    const diamond = root.querySelector<HTMLElement>(
      '.bar[data-bucket="Diamond"]',
    );
    expect(diamond?.style.width).toBe("100%");
    const bronze = root.querySelector<HTMLElement>(
      '.bar[data-bucket="Bronze"]',
    );
    expect(bronze?.style.width).toBe("50%");
  });

  it("prints the per-bucket figures next to each bar", async () => {
    const { root, dashboard } = setup();
    await dashboard.refresh();
    const values = Array.from(
      root.querySelectorAll(".bar-value"),
      (node) => node.textContent,
    );
    expect(values[0]).toBe("50.0% of 2 (agreement 1.00)");
    expect(values[2]).toBe("80.0% of 2 (agreement -)");
  });
});

describe("recommendation line", () => {
  it("shows the server's boundary, rho and clearing buckets verbatim", async () => {
    const { root, dashboard } = setup();
    await dashboard.refresh();
    const boundary = root.querySelector(".boundary")?.textContent ?? "";
    expect(boundary).toContain("54.5");
    expect(boundary).toContain("(rho 0.545)");
    expect(boundary).toContain("85% relevance");
    expect(root.querySelector(".clearing")?.textContent).toBe(
      "Buckets clearing the target: Platinum, Diamond",
    );
    expect(root.querySelector(".warning")).toBeNull();
  });

  it("surfaces the warning when no bucket clears the target", async () => {
    const { client, root, dashboard } = setup();
    client.statsResponse!.recommended = {
      boundary: 55.5,
      rho: 0.555,
      buckets: [],
      warning: "no bucket reaches the target relevance",
    };
    await dashboard.refresh();
    expect(root.querySelector(".warning")?.textContent).toBe(
      "no bucket reaches the target relevance",
    );
    expect(root.querySelector(".clearing")?.textContent).toBe(
      "No bucket clears the target yet",
    );
  });

  it("reports the overall agreement and unrated backlog", async () => {
    const { root, dashboard } = setup();
    await dashboard.refresh();
    expect(root.querySelector(".agreement")?.textContent).toBe(
      "Agreement: 0.90 raw, 0.80 chance-corrected over 20 ratings",
    );
    expect(root.querySelector(".unrated")?.textContent).toBe(
      "1 sampled items still unrated",
    );
  });
});

describe("empty and failure states", () => {
  it("invites the first rating when none exist yet", async () => {
    const { client, root, dashboard } = setup();
    client.agreementResponse!.n_ratings = 0;
    await dashboard.refresh();
    expect(root.querySelector(".empty")?.textContent).toBe(
      "No ratings yet. Pick a task and start rating.",
    );
    expect(root.querySelectorAll(".bar")).toHaveLength(0);
  });

  it("explains a missing sample instead of erroring", async () => {
    const { client, root, dashboard } = setup();
    client.failNextStats = new ApiError(404, "no sample loaded");
    await dashboard.refresh();
    expect(root.querySelector(".empty")?.textContent).toBe(
      "No sample on the server yet.",
    );
  });

  it("reports other failures when nothing was fetched before", async () => {
    const { client, root, dashboard } = setup();
    client.failNextStats = new Error("connection refused");
    await dashboard.refresh();
    expect(root.querySelector(".empty")?.textContent).toContain(
      "Statistics unavailable",
    );
  });

  it("keeps the last figures with a stale marker when a refresh fails", async () => {
    const { client, root, dashboard } = setup();
    await dashboard.refresh();
    client.failNextStats = new Error("connection refused");
    await dashboard.refresh();
    expect(root.querySelector(".stale")?.textContent).toBe(
      "stale: latest refresh failed",
    );
    expect(root.querySelectorAll(".bar")).toHaveLength(5);
    expect(root.querySelector(".boundary")?.textContent).toContain("54.5");
  });
});
