// Typed client for the calibration server's HTTP API. The UI computes no
// statistics of its own; everything rendered comes from these endpoints.

export type TaskKind =
  | "bucket_relevance"
  | "dedup_pair"
  | "likert_correctness"
  | "likert_naturalness";

export const TASK_KINDS: TaskKind[] = [
  "bucket_relevance",
  "dedup_pair",
  "likert_correctness",
  "likert_naturalness",
];

export type RatingValue = string | number | boolean;

export interface TaskItem {
  item_id: string;
  task: TaskKind;
  image_url?: string;
  image_urls?: string[];
  caption?: string;
  bucket?: string | null;
  rubric?: Record<string, string>;
}

export interface NextResponse {
  item: TaskItem | null;
  done: boolean;
}

export interface SubmitResponse {
  accepted: boolean;
  total_ratings: number;
}

export interface BucketStat {
  bucket: string;
  lower: number | null;
  upper: number | null;
  n_items: number;
  relevance_pct: number;
  agreement: number | null;
}

export interface Recommendation {
  boundary: number;
  rho: number;
  buckets: string[];
  warning: string | null;
}

export interface BucketStatsResponse {
  stats: BucketStat[];
  recommended: Recommendation;
  target_relevance_pct: number;
  unrated: string[];
}

export interface AgreementResponse {
  percent_agreement: number;
  chance_corrected: number;
  per_task: Record<string, number>;
  n_ratings: number;
}

export interface ReviewClient {
  nextItem(rater: string, task: TaskKind): Promise<NextResponse>;
  submitRating(
    rater: string,
    itemId: string,
    task: TaskKind,
    value: RatingValue,
  ): Promise<SubmitResponse>;
  bucketStats(): Promise<BucketStatsResponse>;
  agreement(): Promise<AgreementResponse>;
  imageUrl(path: string): string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function readDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
    if (body.detail !== undefined) return JSON.stringify(body.detail);
  } catch {
    // fall through to the status line
  }
  return `HTTP ${response.status}`;
}

export class ReviewApi implements ReviewClient {
  constructor(readonly base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.base + path, init);
    if (!response.ok) {
      throw new ApiError(response.status, await readDetail(response));
    }
    return (await response.json()) as T;
  }

  nextItem(rater: string, task: TaskKind): Promise<NextResponse> {
    const query = new URLSearchParams({ rater, task });
    return this.request(`/api/tasks/next?${query}`);
  }

  submitRating(
    rater: string,
    itemId: string,
    task: TaskKind,
    value: RatingValue,
  ): Promise<SubmitResponse> {
    return this.request("/api/ratings", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        rater_id: rater,
        item_id: itemId,
        task,
        value,
      }),
    });
  }

  bucketStats(): Promise<BucketStatsResponse> {
    return this.request("/api/stats/buckets");
  }

  agreement(): Promise<AgreementResponse> {
    return this.request("/api/stats/agreement");
  }

  imageUrl(path: string): string {
    return this.base + path;
  }
}
