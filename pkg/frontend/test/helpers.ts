/** Shared helpers for reading recorded exchanges and rendered fields. */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const here = dirname(fileURLToPath(import.meta.url));

export interface Exchange<T> {
  method: string;
  path: string;
  status: number;
  request?: unknown;
  response: T;
}

// The recorded gateway session; see scripts/record-with-gateways.sh.
export function loadSession(): Record<string, Exchange<any>> {
  return JSON.parse(
    readFileSync(join(here, "fixtures", "recorded_session.json"), "utf-8"),
  );
}

export function container(): HTMLElement {
  const node = document.createElement("div");
  document.body.append(node);
  return node;
}

/** textContent of every element tagged data-field=name, in DOM order. */
export function fieldTexts(root: Element, name: string): string[] {
  return Array.from(root.querySelectorAll(`[data-field="${name}"]`)).map(
    (node) => node.textContent ?? "",
  );
}

/** The single data-field=name value under root; fails if absent or repeated. */
export function fieldText(root: Element, name: string): string {
  const texts = fieldTexts(root, name);
  if (texts.length !== 1) {
    throw new Error(`expected exactly one data-field=${name}, found ${texts.length}`);
  }
  return texts[0]!;
}
