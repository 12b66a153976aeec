// A = accept, E = submit edits, R = reject; arrows toggle band.

export interface KeyHandlers {
  onAccept: () => void;
  onEdit: () => void;
  onReject: () => void;
  onPrevBand?: () => void;
  onNextBand?: () => void;
}

export function keyFor(event: { key: string; target?: unknown }): string | null {
  const target = event.target as { tagName?: string } | undefined;
  if (target?.tagName === "INPUT" || target?.tagName === "TEXTAREA") return null;
  return event.key.toLowerCase();
}

export function bindKeys(handlers: KeyHandlers, target: EventTarget): () => void {
  const listener = (raw: Event) => {
    const event = raw as KeyboardEvent;
    const key = keyFor(event);
    if (key === null) return;
    if (key === "a") handlers.onAccept();
    else if (key === "e") handlers.onEdit();
    else if (key === "r") handlers.onReject();
    else if (key === "arrowleft") handlers.onPrevBand?.();
    else if (key === "arrowright") handlers.onNextBand?.();
    else return;
    event.preventDefault?.();
  };
  target.addEventListener("keydown", listener);
  return () => target.removeEventListener("keydown", listener);
}
