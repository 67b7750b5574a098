// Live statistics view. Every figure comes from the server; when a refresh
// fails the previous figures stay up with a visible stale marker.

import {
  AgreementResponse,
  ApiError,
  BucketStatsResponse,
  ReviewClient,
} from "./api";

function messageOf(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

export class Dashboard {
  private lastStats: BucketStatsResponse | null = null;
  private lastAgreement: AgreementResponse | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ReviewClient,
  ) {}

  async refresh(): Promise<void> {
    let stats: BucketStatsResponse;
    let agreement: AgreementResponse;
    try {
      [stats, agreement] = await Promise.all([
        this.api.bucketStats(),
        this.api.agreement(),
      ]);
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.renderEmpty("No sample on the server yet.");
        return;
      }
      if (this.lastStats && this.lastAgreement) {
        this.render(this.lastStats, this.lastAgreement, true);
      } else {
        this.renderEmpty(`Statistics unavailable: ${messageOf(err)}`);
      }
      return;
    }
    this.lastStats = stats;
    this.lastAgreement = agreement;
    this.render(stats, agreement, false);
  }

  private doc(): Document {
    return this.root.ownerDocument;
  }

  private el(tag: string, className: string, text?: string): HTMLElement {
    const node = this.doc().createElement(tag);
    node.className = className;
    if (text !== undefined) node.textContent = text;
    return node;
  }

  private renderEmpty(text: string): void {
    this.root.textContent = "";
    this.root.appendChild(this.el("p", "empty", text));
  }

  private render(
    stats: BucketStatsResponse,
    agreement: AgreementResponse,
    stale: boolean,
  ): void {
    this.root.textContent = "";
    if (stale) {
      this.root.appendChild(
        this.el("div", "stale", "stale: latest refresh failed"),
      );
    }
    if (agreement.n_ratings === 0) {
      this.root.appendChild(
        this.el("p", "empty", "No ratings yet. Pick a task and start rating."),
      );
      return;
    }

    const bars = this.el("div", "bars");
    for (const stat of stats.stats) {
      const row = this.el("div", "bar-row");
      row.appendChild(this.el("span", "bar-label", stat.bucket));
      const track = this.el("div", "bar-track");
      const bar = this.el("div", "bar");
      bar.dataset.bucket = stat.bucket;
      bar.style.width = `${stat.relevance_pct}%`;
      track.appendChild(bar);
      row.appendChild(track);
      const agreementText =
        stat.agreement === null ? "-" : stat.agreement.toFixed(2);
      row.appendChild(
        this.el(
          "span",
          "bar-value",
          `${stat.relevance_pct.toFixed(1)}% of ${stat.n_items} ` +
            `(agreement ${agreementText})`,
        ),
      );
      bars.appendChild(row);
    }
    this.root.appendChild(bars);

    const recommended = this.el("div", "recommended");
    recommended.appendChild(
      this.el(
        "p",
        "boundary",
        `Recommended boundary ${stats.recommended.boundary} ` +
          `(rho ${stats.recommended.rho}) for target ` +
          `${stats.target_relevance_pct}% relevance`,
      ),
    );
    recommended.appendChild(
      this.el(
        "p",
        "clearing",
        stats.recommended.buckets.length > 0
          ? `Buckets clearing the target: ${stats.recommended.buckets.join(", ")}`
          : "No bucket clears the target yet",
      ),
    );
    if (stats.recommended.warning) {
      recommended.appendChild(
        this.el("p", "warning", stats.recommended.warning),
      );
    }
    this.root.appendChild(recommended);

    this.root.appendChild(
      this.el(
        "p",
        "agreement",
        `Agreement: ${agreement.percent_agreement.toFixed(2)} raw, ` +
          `${agreement.chance_corrected.toFixed(2)} chance-corrected ` +
          `over ${agreement.n_ratings} ratings`,
      ),
    );
    if (stats.unrated.length > 0) {
      this.root.appendChild(
        this.el("p", "unrated", `${stats.unrated.length} sampled items still unrated`),
      );
    }
  }
}
