// Page wire-up: rater identity, one tab per task kind, the rating panel,
// and the dashboard refreshing after every accepted rating.

import { ReviewApi, TASK_KINDS, TaskKind } from "./api";
import { Dashboard } from "./dashboard";
import { RatingPanel } from "./rate";

const TASK_LABELS: Record<TaskKind, string> = {
  bucket_relevance: "Relevance",
  dedup_pair: "Duplicate pairs",
  likert_correctness: "Caption correctness",
  likert_naturalness: "Caption naturalness",
};

function raterId(): string {
  const stored = window.localStorage.getItem("curator-rater");
  if (stored) return stored;
  const fresh = `rater-${Math.random().toString(36).slice(2, 8)}`;
  window.localStorage.setItem("curator-rater", fresh);
  return fresh;
}

export function init(app: HTMLElement): void {
  const api = new ReviewApi("");
  const rater = raterId();

  const header = document.createElement("header");
  header.innerHTML = `<h1>Review</h1><span class="rater">rater: ${rater}</span>`;
  app.appendChild(header);

  const tabs = document.createElement("nav");
  tabs.className = "tabs";
  app.appendChild(tabs);

  const panelRoot = document.createElement("section");
  panelRoot.className = "panel";
  app.appendChild(panelRoot);

  const dashboardRoot = document.createElement("section");
  dashboardRoot.className = "dashboard";
  app.appendChild(dashboardRoot);

  const dashboard = new Dashboard(dashboardRoot, api);
  let panel: RatingPanel | null = null;

  function openTask(task: TaskKind): void {
    for (const button of tabs.querySelectorAll("button")) {
      button.classList.toggle("active", button.dataset.task === task);
    }
    panelRoot.textContent = "";
    panel = new RatingPanel(panelRoot, api, {
      rater,
      task,
      onSubmitted: () => void dashboard.refresh(),
    });
    void panel.load();
  }

  for (const task of TASK_KINDS) {
    const button = document.createElement("button");
    button.dataset.task = task;
    button.textContent = TASK_LABELS[task];
    button.addEventListener("click", () => openTask(task));
    tabs.appendChild(button);
  }

  document.addEventListener("keydown", (event) => {
    if (event.target instanceof HTMLInputElement) return;
    panel?.handleKey(event.key);
  });

  openTask("bucket_relevance");
  void dashboard.refresh();
}

const app = document.getElementById("app");
if (app) {
  init(app);
}
