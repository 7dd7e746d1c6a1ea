/** App wiring: scene picker, item review loop, top-down canvas, verdict form. */

import { ApiClient } from "./api.js";
import {
  ASPECTS,
  emptyForm,
  isSubmittable,
  setFixedAnswer,
  setScore,
  setVerdict,
  toBody,
  type FormState,
} from "./form.js";
import { collectHighlights, plainText } from "./highlights.js";
import { mapKey } from "./keyboard.js";
import { VerdictQueue } from "./optimistic.js";
import { draw, hitTest } from "./topdown.js";
import { fitBounds, panBy, zoomAt, type ViewTransform } from "./transform.js";
import type { Item, TopdownPayload } from "./types.js";

const api = new ApiClient("");

interface AppState {
  sceneId: string | null;
  items: Item[];
  cursor: number;
  topdown: TopdownPayload | null;
  view: ViewTransform;
  form: FormState;
  hoverId: number | null;
  status: string;
}

const state: AppState = {
  sceneId: null,
  items: [],
  cursor: 0,
  topdown: null,
  view: { scale: 60, offsetX: 0, offsetY: 0 },
  form: emptyForm(),
  hoverId: null,
  status: "",
};

const el = {
  canvas: document.getElementById("topdown") as HTMLCanvasElement,
  sceneSelect: document.getElementById("scene-select") as HTMLSelectElement,
  question: document.getElementById("question")!,
  answer: document.getElementById("answer")!,
  situation: document.getElementById("situation")!,
  category: document.getElementById("category")!,
  progress: document.getElementById("progress")!,
  status: document.getElementById("status")!,
  scores: document.getElementById("scores")!,
  verdictButtons: document.getElementById("verdict-buttons")!,
  fixedAnswer: document.getElementById("fixed-answer") as HTMLInputElement,
  submit: document.getElementById("submit") as HTMLButtonElement,
  hover: document.getElementById("hover-info")!,
  pending: document.getElementById("pending")!,
};

const reviewer =
  localStorage.getItem("situgen-reviewer") ??
  (() => {
    const name = `reviewer-${Math.random().toString(36).slice(2, 8)}`;
    localStorage.setItem("situgen-reviewer", name);
    return name;
  })();

const queue = new VerdictQueue((qaId, body) => api.submitVerdict(qaId, body), {
  onPersisted: () => {
    void refreshProgress();
    renderPending();
  },
  onFieldErrors: (qaId, errors) => {
    state.status = `verdict for ${qaId} rejected: ${JSON.stringify(errors)}`;
    render();
  },
});

function currentItem(): Item | null {
  return state.items[state.cursor] ?? null;
}

function segmentsToHtml(segments: Item["question"]): string {
  return segments
    .map((seg) => {
      if (seg.kind === "image_slot") {
        const thumb = seg.image_ref
          ? `<img class="thumb" src="${seg.image_ref}" alt="${seg.payload}">`
          : "";
        return `<span class="slot" title="${seg.payload}">${seg.payload}${thumb}</span>`;
      }
      return `<span>${seg.payload}</span>`;
    })
    .join("");
}

async function loadScenes(): Promise<void> {
  const scenes = await api.listScenes();
  el.sceneSelect.innerHTML =
    `<option value="">all scenes</option>` +
    scenes
      .map((s) => `<option value="${s.scene_id}">${s.scene_id} (${s.n_items})</option>`)
      .join("");
}

async function loadItems(): Promise<void> {
  const page = await api.listItems(state.sceneId ?? undefined, 0, 200);
  state.items = page.items;
  state.cursor = 0;
  await loadTopdown();
  render();
}

async function loadTopdown(): Promise<void> {
  const item = currentItem();
  if (!item) {
    state.topdown = null;
    return;
  }
  state.topdown = await api.topdown(item.scene_id, item.qa_id);
  state.view = fitBounds(state.topdown.bounds, el.canvas.width, el.canvas.height);
}

async function refreshProgress(): Promise<void> {
  const p = await api.progress();
  el.progress.textContent = `${p.reviewed} / ${p.total} reviewed`;
}

function renderPending(): void {
  el.pending.textContent = queue.size ? `${queue.size} unsent verdict(s), retrying…` : "";
}

function render(): void {
  const item = currentItem();
  if (!item) {
    el.question.textContent = "no items";
    return;
  }
  el.category.textContent = `${item.category} · ${item.provenance} · ${item.qa_id}`;
  el.question.innerHTML = segmentsToHtml(item.question);
  el.answer.textContent = item.answer;
  el.situation.innerHTML =
    segmentsToHtml(item.situation.action_text) +
    " " +
    segmentsToHtml(item.situation.location_text);
  el.status.textContent = state.status;

  el.scores.innerHTML = ASPECTS.map((aspect) => {
    const value = state.form.scores[aspect];
    const active = state.form.activeAspect === aspect ? " active" : "";
    const dots = [1, 2, 3, 4, 5]
      .map(
        (v) =>
          `<button class="dot${value === v ? " set" : ""}" data-aspect="${aspect}" data-value="${v}">${v}</button>`,
      )
      .join("");
    return `<div class="aspect${active}"><label>${aspect}</label>${dots}</div>`;
  }).join("");

  for (const kind of ["accept", "reject", "fix"] as const) {
    const btn = el.verdictButtons.querySelector(`[data-verdict="${kind}"]`)!;
    btn.classList.toggle("set", state.form.verdict === kind);
  }
  el.fixedAnswer.style.display = state.form.verdict === "fix" ? "" : "none";
  el.submit.disabled = !isSubmittable(state.form);

  if (state.topdown) {
    const highlights = collectHighlights(item);
    draw(
      el.canvas.getContext("2d")!,
      { ...state.topdown, highlight_ids: highlights },
      state.view,
      { hoverId: state.hoverId },
    );
  }
}

function advance(delta: -1 | 1): void {
  const next = state.cursor + delta;
  if (next < 0 || next >= state.items.length) return;
  state.cursor = next;
  state.form = emptyForm();
  state.status = "";
  void loadTopdown().then(render);
}

function submit(): void {
  const item = currentItem();
  if (!item || !isSubmittable(state.form)) return;
  queue.enqueue(item.qa_id, toBody(state.form, reviewer));
  renderPending();
  advance(1); // optimistic: move on immediately
}

// --- events

el.sceneSelect.addEventListener("change", () => {
  state.sceneId = el.sceneSelect.value || null;
  void loadItems();
});

el.scores.addEventListener("click", (ev) => {
  const target = ev.target as HTMLElement;
  if (target.dataset.aspect && target.dataset.value) {
    state.form = setScore(
      state.form,
      target.dataset.aspect as (typeof ASPECTS)[number],
      Number(target.dataset.value),
    );
    render();
  }
});

el.verdictButtons.addEventListener("click", (ev) => {
  const target = ev.target as HTMLElement;
  const kind = target.dataset.verdict as "accept" | "reject" | "fix" | undefined;
  if (kind) {
    state.form = setVerdict(state.form, kind);
    render();
  }
});

el.fixedAnswer.addEventListener("input", () => {
  state.form = setFixedAnswer(state.form, el.fixedAnswer.value);
  el.submit.disabled = !isSubmittable(state.form);
});

el.submit.addEventListener("click", submit);

document.addEventListener("keydown", (ev) => {
  const inText = document.activeElement === el.fixedAnswer;
  const action = mapKey(ev.key, inText);
  if (!action) return;
  ev.preventDefault();
  switch (action.type) {
    case "score":
      state.form = setScore(state.form, state.form.activeAspect, action.value);
      break;
    case "verdict":
      state.form = setVerdict(state.form, action.value);
      if (action.value === "fix") el.fixedAnswer.focus();
      break;
    case "nav":
      advance(action.delta);
      return;
    case "submit":
      submit();
      return;
    case "cycle-aspect": {
      const idx = ASPECTS.indexOf(state.form.activeAspect);
      state.form = { ...state.form, activeAspect: ASPECTS[(idx + 1) % ASPECTS.length]! };
      break;
    }
  }
  render();
});

// pan / zoom / hover
let dragging: { x: number; y: number } | null = null;
el.canvas.addEventListener("mousedown", (ev) => {
  dragging = { x: ev.offsetX, y: ev.offsetY };
});
el.canvas.addEventListener("mousemove", (ev) => {
  if (dragging) {
    state.view = panBy(state.view, ev.offsetX - dragging.x, ev.offsetY - dragging.y);
    dragging = { x: ev.offsetX, y: ev.offsetY };
    render();
    return;
  }
  if (!state.topdown) return;
  const id = hitTest(state.topdown, state.view, ev.offsetX, ev.offsetY);
  if (id !== state.hoverId) {
    state.hoverId = id;
    const obj = state.topdown.objects.find((o) => o.id === id);
    el.hover.textContent = obj
      ? `${obj.label}-${obj.id}  ${Object.entries(obj.attributes)
          .map(([k, v]) => `${k}: ${v}`)
          .join(", ")}`
      : "";
    render();
  }
});
window.addEventListener("mouseup", () => (dragging = null));
el.canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  const factor = ev.deltaY < 0 ? 1.15 : 1 / 1.15;
  state.view = zoomAt(state.view, ev.offsetX, ev.offsetY, factor);
  render();
});

async function start(): Promise<void> {
  try {
    await loadScenes();
    await loadItems();
    await refreshProgress();
  } catch (err) {
    el.status.textContent = `failed to load: ${err}`;
  }
}

void start();
