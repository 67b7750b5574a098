import {
  AgreementResponse,
  BucketStatsResponse,
  NextResponse,
  RatingValue,
  ReviewClient,
  SubmitResponse,
  TaskItem,
  TaskKind,
} from "../src/api";

export async function flush(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 0));
}

export async function until(
  predicate: () => boolean,
  timeoutMs = 10000,
): Promise<void> {
  const start = Date.now();
  while (!predicate()) {
    if (Date.now() - start > timeoutMs) {
      throw new Error("condition not reached in time");
    }
    await new Promise((resolve) => setTimeout(resolve, 10));
  }
}

export interface SubmittedRating {
  rater: string;
  itemId: string;
  task: TaskKind;
  value: RatingValue;
}

export class FakeClient implements ReviewClient {
  queue: TaskItem[] = [];
  submitted: SubmittedRating[] = [];
  failNextSubmit: Error | null = null;
  failNextLoad: Error | null = null;
  statsResponse: BucketStatsResponse | null = null;
  agreementResponse: AgreementResponse | null = null;
  failNextStats: Error | null = null;

  async nextItem(_rater: string, _task: TaskKind): Promise<NextResponse> {
    if (this.failNextLoad) {
      const err = this.failNextLoad;
      this.failNextLoad = null;
      throw err;
    }
    const item = this.queue[0] ?? null;
    return { item, done: item === null };
  }

  async submitRating(
    rater: string,
    itemId: string,
    task: TaskKind,
    value: RatingValue,
  ): Promise<SubmitResponse> {
    if (this.failNextSubmit) {
      const err = this.failNextSubmit;
      this.failNextSubmit = null;
      throw err;
    }
    this.submitted.push({ rater, itemId, task, value });
    this.queue.shift();
    return { accepted: true, total_ratings: this.submitted.length };
  }

  async bucketStats(): Promise<BucketStatsResponse> {
    if (this.failNextStats) {
      const err = this.failNextStats;
      this.failNextStats = null;
      throw err;
    }
    if (!this.statsResponse) throw new Error("no stats configured");
    return this.statsResponse;
  }

  async agreement(): Promise<AgreementResponse> {
    if (!this.agreementResponse) throw new Error("no agreement configured");
    return this.agreementResponse;
  }

  imageUrl(path: string): string {
    return path;
  }
}
