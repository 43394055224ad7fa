import { ReviewApi } from "./api.js";
import { ReviewApp } from "./app.js";
import { bindHotkeys } from "./hotkeys.js";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app element");
}

const params = new URLSearchParams(window.location.search);
const api = new ReviewApi("");
const app = new ReviewApp({
  api,
  root,
  reviewer: params.get("reviewer") ?? undefined,
});

bindHotkeys(document, {
  keep: () => {
    const item = app.selectedItem();
    if (item && item.decision === "pending") void app.keep(item.id);
  },
  setLabel: (label: number) => {
    const item = app.selectedItem();
    if (!item || item.decision !== "pending") return;
    if (item.label_options.some((o) => o.id === label)) {
      void app.relabel(item.id, label);
    }
  },
  next: () => app.next(),
  prev: () => app.prev(),
});

void app.init();
