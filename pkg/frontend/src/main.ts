/** App bootstrap: question form, trace explorer, event browser. */

import { ask, AskFailure, AskResponse, fetchConfig, fetchEvents, fetchPersonas, isFailure }
  from "./api.js";
import { mount, onAction } from "./dom.js";
import { h, renderAskView, renderEventBrowser, renderFailureView } from "./render.js";
import { initialState, nextSlide, prevSlide, toggleDevMode, toggleNode, TraceViewState }
  from "./viewmodel.js";
import type { EventsPage } from "./api.js";

interface AppState {
  view: TraceViewState;
  result: AskResponse | AskFailure | null;
  browser: EventsPage | null;
  browserQuery: string;
  pending: boolean;
}

const state: AppState = {
  view: initialState(),
  result: null,
  browser: null,
  browserQuery: "",
  pending: false,
};

const $ = (id: string) => document.getElementById(id)!;

function renderResult(): void {
  const container = $("result") as HTMLElement;
  if (!state.result) {
    container.replaceChildren();
    return;
  }
  const view = isFailure(state.result)
    ? renderFailureView(state.result, state.view)
    : renderAskView(state.result, state.view);
  mount(container, view);
}

function renderBrowser(): void {
  mount($("browser") as HTMLElement, renderEventBrowser(state.browser, state.browserQuery));
}

async function loadEvents(page: number): Promise<void> {
  const persona = ($("persona") as HTMLSelectElement).value;
  state.browser = await fetchEvents(persona, state.browserQuery, page, 15);
  renderBrowser();
}

function scrollToEvent(id: string): void {
  const row = document.getElementById(`event-${id}`);
  if (row) {
    row.scrollIntoView({ behavior: "smooth", block: "center" });
    row.classList.add("highlight");
    setTimeout(() => row.classList.remove("highlight"), 1500);
  } else {
    void loadEvents(1);
  }
}

function dispatch(action: string[]): void {
  const [kind, ...args] = action;
  if (kind === "toggle") {
    state.view = toggleNode(state.view, args.join(":"));
    renderResult();
  } else if (kind === "slide-next" || kind === "slide-prev") {
    const total = Number(action[action.length - 1]);
    const key = action.slice(1, -1).join(":");
    state.view = kind === "slide-next"
      ? nextSlide(state.view, key, total)
      : prevSlide(state.view, key, total);
    renderResult();
  } else if (kind === "event") {
    scrollToEvent(args[0]);
  } else if (kind === "page") {
    void loadEvents(Number(args[0]));
  }
}

async function submitQuestion(): Promise<void> {
  if (state.pending) return; // one in-flight ask at a time
  const question = ($("question") as HTMLInputElement).value.trim();
  if (!question) return;
  state.pending = true;
  ($("ask-button") as HTMLButtonElement).disabled = true;
  try {
    const sources = Array.from(
      document.querySelectorAll<HTMLInputElement>("#sources input:checked"),
    ).map((el) => el.value);
    const request = {
      question,
      persona: ($("persona") as HTMLSelectElement).value,
      planner: ($("planner") as HTMLSelectElement).value as "template" | "llm" | "auto",
      reference_date: ($("reference-date") as HTMLInputElement).value || undefined,
      sources: sources.length ? sources : undefined,
    };
    state.result = await ask(request);
    state.view = initialState();
    state.view = { ...state.view, devMode: ($("dev-mode") as HTMLInputElement).checked };
    renderResult();
  } finally {
    state.pending = false;
    ($("ask-button") as HTMLButtonElement).disabled = false;
  }
}

async function boot(): Promise<void> {
  const [config, personas] = await Promise.all([fetchConfig(), fetchPersonas()]);
  const personaSelect = $("persona") as HTMLSelectElement;
  mount($("sources") as HTMLElement, h("div", {},
    ...config.sources.map((s) => h("label", { class: "source" },
      h("input", { type: "checkbox", value: s, checked: "1" }), s))));
  personaSelect.replaceChildren(...personas.map((p) => {
    const option = document.createElement("option");
    option.value = p.name;
    option.textContent = `${p.name} (${p.n_events} events)`;
    return option;
  }));
  ($("reference-date") as HTMLInputElement).value = config.reference_date;
  ($("ask-button") as HTMLButtonElement).addEventListener("click", () => void submitQuestion());
  ($("question") as HTMLInputElement).addEventListener("keydown", (event) => {
    if (event.key === "Enter") void submitQuestion();
  });
  ($("dev-mode") as HTMLInputElement).addEventListener("change", () => {
    state.view = toggleDevMode(state.view);
    renderResult();
  });
  ($("search") as HTMLInputElement).addEventListener("change", () => {
    state.browserQuery = ($("search") as HTMLInputElement).value;
    void loadEvents(1);
  });
  personaSelect.addEventListener("change", () => void loadEvents(1));
  onAction($("result") as HTMLElement, dispatch);
  onAction($("browser") as HTMLElement, dispatch);
  await loadEvents(1);
}

void boot();
