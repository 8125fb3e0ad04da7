/** Thin DOM layer: materializes VNodes and forwards data-action clicks. */

import type { VNode } from "./render.js";

export function materialize(node: VNode | string, doc: Document): Node {
  if (typeof node === "string") return doc.createTextNode(node);
  const el = doc.createElement(node.tag);
  for (const [key, value] of Object.entries(node.attrs)) {
    if (key === "disabled") {
      if (value) el.setAttribute("disabled", "");
    } else {
      el.setAttribute(key, value);
    }
  }
  for (const child of node.children) {
    el.appendChild(materialize(child, doc));
  }
  return el;
}

export function mount(container: HTMLElement, node: VNode): void {
  container.replaceChildren(materialize(node, container.ownerDocument));
}

/** One delegated listener per container; actions look like "toggle:1.2". */
export function onAction(container: HTMLElement,
                         handler: (action: string[]) => void): void {
  container.addEventListener("click", (event) => {
    let target = event.target as HTMLElement | null;
    while (target && target !== container) {
      const action = target.getAttribute("data-action");
      if (action) {
        event.preventDefault();
        handler(action.split(":"));
        return;
      }
      target = target.parentElement;
    }
  });
}
