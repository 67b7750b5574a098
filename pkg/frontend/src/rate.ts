// One rating screen: fetches the next item for (rater, task), renders it by
// task kind, and posts the selection. A failed submit keeps the selected
// value and shows a retry control, so no rating is silently lost.

import {
  ApiError,
  RatingValue,
  ReviewClient,
  TaskItem,
  TaskKind,
} from "./api";
import { RELEVANCE_OPTIONS, collapseOption } from "./options";

export type PanelState = "loading" | "ready" | "submitting" | "done" | "error";

export interface RatingPanelOptions {
  rater: string;
  task: TaskKind;
  onSubmitted?: () => void;
}

function messageOf(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

export class RatingPanel {
  private item: TaskItem | null = null;
  private pending: RatingValue | null = null;
  private keyMap: Record<string, RatingValue> = {};
  submittedCount = 0;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ReviewClient,
    private readonly options: RatingPanelOptions,
  ) {
    this.root.dataset.state = "loading";
  }

  get state(): PanelState {
    return (this.root.dataset.state as PanelState) ?? "loading";
  }

  get currentItem(): TaskItem | null {
    return this.item;
  }

  async load(): Promise<void> {
    this.setState("loading");
    this.pending = null;
    let next;
    try {
      next = await this.api.nextItem(this.options.rater, this.options.task);
    } catch (err) {
      this.renderError(`could not load the next item: ${messageOf(err)}`, null);
      return;
    }
    if (next.done || next.item === null) {
      this.item = null;
      this.renderDone();
      return;
    }
    this.item = next.item;
    this.renderItem(next.item);
  }

  async submit(value: RatingValue): Promise<void> {
    const item = this.item;
    if (item === null || this.state === "submitting") return;
    this.setState("submitting");
    try {
      await this.api.submitRating(
        this.options.rater,
        item.item_id,
        this.options.task,
        value,
      );
    } catch (err) {
      if (!(err instanceof ApiError) || err.status !== 409) {
        this.renderError(`submit failed: ${messageOf(err)}`, value);
        return;
      }
      // 409: the server already holds this rating; advance without recounting
    }
    this.submittedCount += 1;
    this.options.onSubmitted?.();
    await this.load();
  }

  handleKey(key: string): void {
    if (this.state !== "ready") return;
    const value = this.keyMap[key.toLowerCase()];
    if (value !== undefined) {
      void this.submit(value);
    }
  }

  private setState(state: PanelState): void {
    this.root.dataset.state = state;
  }

  private doc(): Document {
    return this.root.ownerDocument;
  }

  private clear(): void {
    this.root.textContent = "";
    this.keyMap = {};
  }

  private el(tag: string, className: string, text?: string): HTMLElement {
    const node = this.doc().createElement(tag);
    node.className = className;
    if (text !== undefined) node.textContent = text;
    return node;
  }

  private optionButton(
    label: string,
    value: RatingValue,
    key: string | null,
  ): HTMLButtonElement {
    const button = this.doc().createElement("button");
    button.className = "option";
    button.dataset.value = String(value);
    button.textContent = key === null ? label : `[${key}] ${label}`;
    button.addEventListener("click", () => void this.submit(value));
    if (key !== null) this.keyMap[key] = value;
    return button;
  }

  private renderItem(item: TaskItem): void {
    this.clear();
    const subject = this.el("div", "subject");
    if (item.image_urls) {
      const pair = this.el("div", "pair");
      for (const url of item.image_urls) {
        const img = this.doc().createElement("img");
        img.src = this.api.imageUrl(url);
        pair.appendChild(img);
      }
      subject.appendChild(pair);
    } else if (item.image_url) {
      const img = this.doc().createElement("img");
      img.src = this.api.imageUrl(item.image_url);
      subject.appendChild(img);
    }
    this.root.appendChild(subject);

    if (item.bucket) {
      this.root.appendChild(this.el("span", "bucket", item.bucket));
    }
    if (item.caption) {
      this.root.appendChild(this.el("p", "caption", item.caption));
    }

    const controls = this.el("div", "controls");
    if (item.task === "bucket_relevance") {
      for (const option of RELEVANCE_OPTIONS) {
        controls.appendChild(
          this.optionButton(
            option.label,
            collapseOption(option.ordinal),
            String(option.ordinal),
          ),
        );
      }
    } else if (item.task === "dedup_pair") {
      controls.appendChild(this.optionButton("Same image", true, "y"));
      controls.appendChild(this.optionButton("Different images", false, "n"));
    } else {
      const rows = Object.entries(item.rubric ?? {}).sort(
        (a, b) => Number(b[0]) - Number(a[0]),
      );
      for (const [score, text] of rows) {
        controls.appendChild(this.optionButton(text, Number(score), score));
      }
    }
    this.root.appendChild(controls);
    this.root.appendChild(
      this.el("div", "counter", `${this.submittedCount} rated this session`),
    );
    this.setState("ready");
  }

  private renderDone(): void {
    this.clear();
    this.root.appendChild(
      this.el(
        "p",
        "done-message",
        `All items rated for this task (${this.submittedCount} this session).`,
      ),
    );
    this.setState("done");
  }

  private renderError(text: string, retryValue: RatingValue | null): void {
    this.pending = retryValue;
    this.clear();
    this.root.appendChild(this.el("p", "error-message", text));
    const retry = this.doc().createElement("button");
    retry.className = "retry";
    retry.textContent = "Retry";
    retry.addEventListener("click", () => {
      if (this.pending !== null) {
        this.setState("ready");
        void this.submit(this.pending);
      } else {
        void this.load();
      }
    });
    this.root.appendChild(retry);
    this.setState("error");
  }
}
