// src/api.ts
var TASK_KINDS = [
  "bucket_relevance",
  "dedup_pair",
  "likert_correctness",
  "likert_naturalness"
];
var ApiError = class extends Error {
  constructor(status, message) {
    super(message);
    this.status = status;
    this.name = "ApiError";
  }
};
async function readDetail(response) {
  try {
    const body = await response.json();
    if (typeof body.detail === "string") return body.detail;
    if (body.detail !== void 0) return JSON.stringify(body.detail);
  } catch {
  }
  return `HTTP ${response.status}`;
}
var ReviewApi = class {
  constructor(base = "") {
    this.base = base;
  }
  async request(path, init2) {
    const response = await fetch(this.base + path, init2);
    if (!response.ok) {
      throw new ApiError(response.status, await readDetail(response));
    }
    return await response.json();
  }
  nextItem(rater, task) {
    const query = new URLSearchParams({ rater, task });
    return this.request(`/api/tasks/next?${query}`);
  }
  submitRating(rater, itemId, task, value) {
    return this.request("/api/ratings", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        rater_id: rater,
        item_id: itemId,
        task,
        value
      })
    });
  }
  bucketStats() {
    return this.request("/api/stats/buckets");
  }
  agreement() {
    return this.request("/api/stats/agreement");
  }
  imageUrl(path) {
    return this.base + path;
  }
};

// src/dashboard.ts
function messageOf(err) {
  return err instanceof Error ? err.message : String(err);
}
var Dashboard = class {
  constructor(root, api) {
    this.root = root;
    this.api = api;
    this.lastStats = null;
    this.lastAgreement = null;
  }
  async refresh() {
    let stats;
    let agreement;
    try {
      [stats, agreement] = await Promise.all([
        this.api.bucketStats(),
        this.api.agreement()
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
  doc() {
    return this.root.ownerDocument;
  }
  el(tag, className, text) {
    const node = this.doc().createElement(tag);
    node.className = className;
    if (text !== void 0) node.textContent = text;
    return node;
  }
  renderEmpty(text) {
    this.root.textContent = "";
    this.root.appendChild(this.el("p", "empty", text));
  }
  render(stats, agreement, stale) {
    this.root.textContent = "";
    if (stale) {
      this.root.appendChild(
        this.el("div", "stale", "stale: latest refresh failed")
      );
    }
    if (agreement.n_ratings === 0) {
      this.root.appendChild(
        this.el("p", "empty", "No ratings yet. Pick a task and start rating.")
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
      const agreementText = stat.agreement === null ? "-" : stat.agreement.toFixed(2);
      row.appendChild(
        this.el(
          "span",
          "bar-value",
          `${stat.relevance_pct.toFixed(1)}% of ${stat.n_items} (agreement ${agreementText})`
        )
      );
      bars.appendChild(row);
    }
    this.root.appendChild(bars);
    const recommended = this.el("div", "recommended");
    recommended.appendChild(
      this.el(
        "p",
        "boundary",
        `Recommended boundary ${stats.recommended.boundary} (rho ${stats.recommended.rho}) for target ${stats.target_relevance_pct}% relevance`
      )
    );
    recommended.appendChild(
      this.el(
        "p",
        "clearing",
        stats.recommended.buckets.length > 0 ? `Buckets clearing the target: ${stats.recommended.buckets.join(", ")}` : "No bucket clears the target yet"
      )
    );
    if (stats.recommended.warning) {
      recommended.appendChild(
        this.el("p", "warning", stats.recommended.warning)
      );
    }
    this.root.appendChild(recommended);
    this.root.appendChild(
      this.el(
        "p",
        "agreement",
        `Agreement: ${agreement.percent_agreement.toFixed(2)} raw, ${agreement.chance_corrected.toFixed(2)} chance-corrected over ${agreement.n_ratings} ratings`
      )
    );
    if (stats.unrated.length > 0) {
      this.root.appendChild(
        this.el("p", "unrated", `${stats.unrated.length} sampled items still unrated`)
      );
    }
  }
};

// src/options.ts
var RELEVANCE_OPTIONS = [
  {
    ordinal: 1,
    label: "Yes. Unique to SEA.",
    mapsTo: "yes"
  },
  {
    ordinal: 2,
    label: "Yes, people will likely think of SEA when seeing the picture, but it may have a low degree of similarity to other cultures.",
    mapsTo: "yes"
  },
  {
    ordinal: 3,
    label: "Maybe. Not originally from SEA but very common in SEA culture.",
    mapsTo: "not_sure"
  },
  {
    ordinal: 4,
    label: "Not really. It has some affiliation to SEA, but actually does not represent SEA or has stronger affiliation to cultures outside SEA.",
    mapsTo: "no"
  },
  {
    ordinal: 5,
    label: "No. Totally unrelated to SEA.",
    mapsTo: "no"
  }
];
function collapseOption(ordinal) {
  const option = RELEVANCE_OPTIONS.find((o) => o.ordinal === ordinal);
  if (!option) {
    throw new RangeError(`no relevance option ${ordinal}`);
  }
  return option.mapsTo;
}

// src/rate.ts
function messageOf2(err) {
  return err instanceof Error ? err.message : String(err);
}
var RatingPanel = class {
  constructor(root, api, options) {
    this.root = root;
    this.api = api;
    this.options = options;
    this.item = null;
    this.pending = null;
    this.keyMap = {};
    this.submittedCount = 0;
    this.root.dataset.state = "loading";
  }
  get state() {
    return this.root.dataset.state ?? "loading";
  }
  get currentItem() {
    return this.item;
  }
  async load() {
    this.setState("loading");
    this.pending = null;
    let next;
    try {
      next = await this.api.nextItem(this.options.rater, this.options.task);
    } catch (err) {
      this.renderError(`could not load the next item: ${messageOf2(err)}`, null);
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
  async submit(value) {
    const item = this.item;
    if (item === null || this.state === "submitting") return;
    this.setState("submitting");
    try {
      await this.api.submitRating(
        this.options.rater,
        item.item_id,
        this.options.task,
        value
      );
    } catch (err) {
      if (!(err instanceof ApiError) || err.status !== 409) {
        this.renderError(`submit failed: ${messageOf2(err)}`, value);
        return;
      }
    }
    this.submittedCount += 1;
    this.options.onSubmitted?.();
    await this.load();
  }
  handleKey(key) {
    if (this.state !== "ready") return;
    const value = this.keyMap[key.toLowerCase()];
    if (value !== void 0) {
      void this.submit(value);
    }
  }
  setState(state) {
    this.root.dataset.state = state;
  }
  doc() {
    return this.root.ownerDocument;
  }
  clear() {
    this.root.textContent = "";
    this.keyMap = {};
  }
  el(tag, className, text) {
    const node = this.doc().createElement(tag);
    node.className = className;
    if (text !== void 0) node.textContent = text;
    return node;
  }
  optionButton(label, value, key) {
    const button = this.doc().createElement("button");
    button.className = "option";
    button.dataset.value = String(value);
    button.textContent = key === null ? label : `[${key}] ${label}`;
    button.addEventListener("click", () => void this.submit(value));
    if (key !== null) this.keyMap[key] = value;
    return button;
  }
  renderItem(item) {
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
            String(option.ordinal)
          )
        );
      }
    } else if (item.task === "dedup_pair") {
      controls.appendChild(this.optionButton("Same image", true, "y"));
      controls.appendChild(this.optionButton("Different images", false, "n"));
    } else {
      const rows = Object.entries(item.rubric ?? {}).sort(
        (a, b) => Number(b[0]) - Number(a[0])
      );
      for (const [score, text] of rows) {
        controls.appendChild(this.optionButton(text, Number(score), score));
      }
    }
    this.root.appendChild(controls);
    this.root.appendChild(
      this.el("div", "counter", `${this.submittedCount} rated this session`)
    );
    this.setState("ready");
  }
  renderDone() {
    this.clear();
    this.root.appendChild(
      this.el(
        "p",
        "done-message",
        `All items rated for this task (${this.submittedCount} this session).`
      )
    );
    this.setState("done");
  }
  renderError(text, retryValue) {
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
};

// src/main.ts
var TASK_LABELS = {
  bucket_relevance: "Relevance",
  dedup_pair: "Duplicate pairs",
  likert_correctness: "Caption correctness",
  likert_naturalness: "Caption naturalness"
};
function raterId() {
  const stored = window.localStorage.getItem("curator-rater");
  if (stored) return stored;
  const fresh = `rater-${Math.random().toString(36).slice(2, 8)}`;
  window.localStorage.setItem("curator-rater", fresh);
  return fresh;
}
function init(app2) {
  const api = new ReviewApi("");
  const rater = raterId();
  const header = document.createElement("header");
  header.innerHTML = `<h1>Review</h1><span class="rater">rater: ${rater}</span>`;
  app2.appendChild(header);
  const tabs = document.createElement("nav");
  tabs.className = "tabs";
  app2.appendChild(tabs);
  const panelRoot = document.createElement("section");
  panelRoot.className = "panel";
  app2.appendChild(panelRoot);
  const dashboardRoot = document.createElement("section");
  dashboardRoot.className = "dashboard";
  app2.appendChild(dashboardRoot);
  const dashboard = new Dashboard(dashboardRoot, api);
  let panel = null;
  function openTask(task) {
    for (const button of tabs.querySelectorAll("button")) {
      button.classList.toggle("active", button.dataset.task === task);
    }
    panelRoot.textContent = "";
    panel = new RatingPanel(panelRoot, api, {
      rater,
      task,
      onSubmitted: () => void dashboard.refresh()
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
var app = document.getElementById("app");
if (app) {
  init(app);
}
export {
  init
};
//# sourceMappingURL=main.js.map
