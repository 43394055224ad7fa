// The review dashboard. All state comes from GET endpoints and every
// label change round-trips through POST /decision, so refreshing the
// page reconstructs exactly the same view.

import { ApiError, QueueItem, ReviewApi } from "./api.js";

export interface AppOptions {
  api: ReviewApi;
  root: HTMLElement;
  reviewer?: string;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  // always textContent: verdict explanations are untrusted LLM output
  if (text !== undefined) node.textContent = text;
  return node;
}

export class ReviewApp {
  private items: QueueItem[] = [];
  private selected = 0;
  private notes = new Map<string, string>();

  constructor(private opts: AppOptions) {}

  async init(): Promise<void> {
    try {
      this.items = await this.opts.api.queue("all");
      this.render(await this.progressText());
    } catch (err) {
      this.renderError(err);
    }
  }

  private async progressText(): Promise<string> {
    const p = await this.opts.api.progress();
    return `${p.decided} / ${p.total} decided, ${p.pending} pending`;
  }

  private renderError(err: unknown): void {
    const root = this.opts.root;
    root.textContent = "";
    const banner = el("div", "banner error");
    banner.appendChild(
      el("span", undefined, `Cannot reach the review service: ${String(err)}`),
    );
    const retry = el("button", "retry", "Retry");
    retry.addEventListener("click", () => void this.init());
    banner.appendChild(retry);
    root.appendChild(banner);
  }

  private render(progress: string): void {
    const root = this.opts.root;
    root.textContent = "";

    const bar = el("div", "progress");
    bar.appendChild(el("span", "progress-text", progress));
    root.appendChild(bar);

    const list = el("ul", "queue");
    this.items.forEach((item, index) => {
      list.appendChild(this.renderItem(item, index));
    });
    root.appendChild(list);

    if (this.items.length === 0) {
      root.appendChild(el("p", "empty", "Queue is empty."));
    }
  }

  private renderItem(item: QueueItem, index: number): HTMLLIElement {
    const decided = item.decision !== "pending";
    const row = el("li", "item" + (decided ? " decided" : "") +
      (index === this.selected ? " selected" : ""));
    row.dataset.id = item.id;

    row.addEventListener("click", () => this.select(index));

    const head = el("div", "item-head");
    head.appendChild(el("span", "item-id", item.id));
    head.appendChild(
      el("span", "item-label", `predicted: ${item.predicted_label_name}`),
    );
    head.appendChild(el("span", "item-verdict", `verdict: ${item.verdict.supported}`));
    row.appendChild(head);

    const textNode = el(
      "p",
      "item-text" + (index === this.selected ? " full" : ""),
      index === this.selected || item.text.length <= 120
        ? item.text
        : item.text.slice(0, 117) + "...",
    );
    row.appendChild(textNode);

    row.appendChild(el("p", "item-explanation", item.verdict.explanation));

    const controls = el("div", "controls");
    const keepBtn = el("button", "keep", "Keep (K)");
    keepBtn.disabled = decided;
    keepBtn.addEventListener("click", (ev) => {
      ev.stopPropagation();
      void this.keep(item.id);
    });
    controls.appendChild(keepBtn);

    for (const option of item.label_options) {
      const btn = el("button", "relabel", `Relabel → ${option.name} (${option.id})`);
      btn.dataset.label = String(option.id);
      btn.disabled = decided || option.id === item.predicted_label;
      btn.addEventListener("click", (ev) => {
        ev.stopPropagation();
        void this.relabel(item.id, option.id);
      });
      controls.appendChild(btn);
    }
    row.appendChild(controls);

    if (decided) {
      const what = item.decision === "keep"
        ? "kept"
        : `relabeled → ${item.set_label}`;
      row.appendChild(el("p", "decision-note", `decision: ${what}`));
    }
    const note = this.notes.get(item.id);
    if (note) {
      row.appendChild(el("p", "item-note", note));
    }
    return row;
  }

  select(index: number): void {
    if (index >= 0 && index < this.items.length) {
      this.selected = index;
      void this.rerender();
    }
  }

  next(): void {
    this.select(Math.min(this.selected + 1, this.items.length - 1));
  }

  prev(): void {
    this.select(Math.max(this.selected - 1, 0));
  }

  selectedItem(): QueueItem | undefined {
    return this.items[this.selected];
  }

  async keep(id: string): Promise<void> {
    await this.submit(id, { action: "keep", reviewer: this.opts.reviewer });
  }

  async relabel(id: string, label: number): Promise<void> {
    await this.submit(id, {
      action: "set_label",
      label,
      reviewer: this.opts.reviewer,
    });
  }

  private async submit(
    id: string,
    body: Parameters<ReviewApi["decide"]>[1],
  ): Promise<void> {
    this.notes.delete(id);
    try {
      const updated = await this.opts.api.decide(id, body);
      this.items = this.items.map((it) => (it.id === id ? updated : it));
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.notes.set(id, "already decided — refreshing state");
        await this.refreshItems();
      } else if (err instanceof ApiError) {
        this.notes.set(id, err.message);
      } else {
        this.renderError(err);
        return;
      }
    }
    await this.rerender();
  }

  private async refreshItems(): Promise<void> {
    try {
      this.items = await this.opts.api.queue("all");
    } catch (err) {
      this.renderError(err);
    }
  }

  private async rerender(): Promise<void> {
    try {
      this.render(await this.progressText());
    } catch (err) {
      this.renderError(err);
    }
  }
}
