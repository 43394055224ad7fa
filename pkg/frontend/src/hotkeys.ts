// Keyboard-first review: queues are worked top to bottom.
//   K = keep, 0-9 = relabel to that label id, J / ArrowDown = next,
//   ArrowUp = previous.

export interface HotkeyHandlers {
  keep(): void;
  setLabel(label: number): void;
  next(): void;
  prev(): void;
}

export function bindHotkeys(target: Document, handlers: HotkeyHandlers): () => void {
  const listener = (event: KeyboardEvent) => {
    if (event.target instanceof HTMLInputElement ||
        event.target instanceof HTMLTextAreaElement) {
      return;
    }
    const key = event.key;
    if (key === "k" || key === "K") {
      handlers.keep();
    } else if (key === "j" || key === "J" || key === "ArrowDown") {
      handlers.next();
    } else if (key === "ArrowUp") {
      handlers.prev();
    } else if (/^[0-9]$/.test(key)) {
      handlers.setLabel(Number(key));
    } else {
      return;
    }
    event.preventDefault();
  };
  target.addEventListener("keydown", listener as EventListener);
  return () => target.removeEventListener("keydown", listener as EventListener);
}
