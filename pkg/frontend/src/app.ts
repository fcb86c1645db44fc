/** Browser try-on app: draw a mask over the face, pick or type a prompt,
 * submit, and compare the edited image against the decoupled one.
 *
 * All state lives in plain objects (MaskGrid, Session); the DOM is a view.
 * Canvas drawing degrades gracefully when no 2D context exists (tests).
 */

import { ApiClient, ApiError, EditRequest, EditResponse, Presets } from "./api.js";
import { MaskGrid } from "./mask.js";
import { Session } from "./session.js";
import { bytesToBase64, encodeMaskPng } from "./png.js";

export type Tool = "brush" | "eraser" | "stamp";

const BRUSH_RADIUS = 2.5;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class App {
  readonly root: HTMLElement;
  readonly client: ApiClient;
  readonly session = new Session();
  presets!: Presets;
  mask!: MaskGrid;
  tool: Tool = "brush";
  imageB64: string | null = null;
  prompt = "";
  inFlight = false;
  lastResponse: EditResponse | null = null;

  private canvas!: HTMLCanvasElement;
  private promptInput!: HTMLInputElement;
  private submitButton!: HTMLButtonElement;
  private warningBox!: HTMLElement;
  private errorBox!: HTMLElement;
  private errorText!: HTMLElement;
  private panes!: { edit: HTMLImageElement; decoupled: HTMLImageElement };
  private paneFigures!: { edit: HTMLElement; decoupled: HTMLElement };
  private historyList!: HTMLOListElement;
  private compareBox!: HTMLElement;

  constructor(root: HTMLElement, client: ApiClient) {
    this.root = root;
    this.client = client;
  }

  async init(): Promise<void> {
    this.presets = await this.client.presets();
    this.mask = new MaskGrid(this.presets.mask_resolution, this.presets.mask_resolution);
    this.buildDom();
  }

  private buildDom(): void {
    const app = el("div", "tryon-app");

    // --- editor ---
    const editor = el("section", "editor");
    const upload = el("input", "image-upload") as HTMLInputElement;
    upload.type = "file";
    upload.accept = "image/png";
    upload.addEventListener("change", () => {
      const file = upload.files?.[0];
      if (!file) return;
      const reader = new FileReader();
      reader.onload = () => {
        const url = String(reader.result);
        this.setImage(url.slice(url.indexOf(",") + 1));
      };
      reader.readAsDataURL(file);
    });
    this.canvas = el("canvas", "mask-canvas");
    this.canvas.width = this.mask.width * 4;
    this.canvas.height = this.mask.height * 4;
    let painting = false;
    this.canvas.addEventListener("pointerdown", (ev) => {
      painting = true;
      this.paintAtClientPoint(ev);
    });
    this.canvas.addEventListener("pointermove", (ev) => {
      if (painting) this.paintAtClientPoint(ev);
    });
    for (const evt of ["pointerup", "pointerleave"]) {
      this.canvas.addEventListener(evt, () => {
        painting = false;
      });
    }
    const tools = el("div", "tools");
    for (const tool of ["brush", "eraser", "stamp"] as Tool[]) {
      const button = el("button", `tool tool-${tool}`, tool);
      button.addEventListener("click", () => this.selectTool(tool));
      tools.appendChild(button);
    }
    const clearButton = el("button", "tool tool-clear", "clear");
    clearButton.addEventListener("click", () => this.clearMask());
    tools.appendChild(clearButton);
    editor.append(upload, this.canvas, tools);

    // --- prompt ---
    const promptSection = el("section", "prompt");
    const chips = el("div", "chips");
    for (const color of this.presets.colors) {
      chips.appendChild(this.makeChip(`chip chip-color`, `${color} glasses`, color));
    }
    for (const style of this.presets.styles) {
      chips.appendChild(this.makeChip(`chip chip-style`, style, style));
    }
    this.promptInput = el("input", "prompt-input") as HTMLInputElement;
    this.promptInput.placeholder = "describe the eyeglasses…";
    this.promptInput.addEventListener("input", () => {
      this.prompt = this.promptInput.value;
    });
    this.submitButton = el("button", "submit", "Try on") as HTMLButtonElement;
    this.submitButton.addEventListener("click", () => {
      void this.submit();
    });
    this.warningBox = el("div", "warning");
    this.warningBox.hidden = true;
    this.errorBox = el("div", "error");
    this.errorBox.hidden = true;
    this.errorText = el("span", "error-text");
    const retry = el("button", "retry", "retry");
    retry.addEventListener("click", () => {
      void this.submit();
    });
    this.errorBox.append(this.errorText, retry);
    promptSection.append(chips, this.promptInput, this.submitButton, this.warningBox, this.errorBox);

    // --- result panes ---
    const results = el("section", "results");
    this.panes = { edit: el("img"), decoupled: el("img") };
    this.paneFigures = {
      edit: el("figure", "pane pane-edit"),
      decoupled: el("figure", "pane pane-decoupled"),
    };
    this.paneFigures.edit.append(this.panes.edit, el("figcaption", undefined, "edited"));
    this.paneFigures.decoupled.append(this.panes.decoupled, el("figcaption", undefined, "decoupled"));
    this.paneFigures.edit.hidden = true;
    this.paneFigures.decoupled.hidden = true;
    results.append(this.paneFigures.edit, this.paneFigures.decoupled);

    // --- history ---
    const history = el("section", "history");
    this.historyList = el("ol", "history-list") as HTMLOListElement;
    this.compareBox = el("div", "compare");
    this.compareBox.hidden = true;
    history.append(this.historyList, this.compareBox);

    app.append(editor, promptSection, results, history);
    this.root.replaceChildren(app);
    this.renderMask();
  }

  private makeChip(className: string, prompt: string, label: string): HTMLButtonElement {
    const chip = el("button", className, label) as HTMLButtonElement;
    chip.addEventListener("click", () => this.setPrompt(prompt));
    return chip;
  }

  setImage(b64: string): void {
    this.imageB64 = b64;
  }

  setPrompt(prompt: string): void {
    this.prompt = prompt;
    this.promptInput.value = prompt;
  }

  selectTool(tool: Tool): void {
    this.tool = tool;
    if (tool === "stamp") {
      this.mask.stampEllipsePair();
      this.renderMask();
    }
  }

  clearMask(): void {
    this.mask.clear();
    this.renderMask();
  }

  /** Apply the active brush/eraser at grid coordinates. */
  applyBrushAt(x: number, y: number): void {
    if (this.tool === "brush" || this.tool === "stamp") {
      this.mask.paintBrush(x, y, BRUSH_RADIUS, 1);
    } else {
      this.mask.paintBrush(x, y, BRUSH_RADIUS, 0);
    }
    this.renderMask();
  }

  private paintAtClientPoint(ev: PointerEvent): void {
    const rect = this.canvas.getBoundingClientRect();
    if (rect.width === 0 || rect.height === 0) return;
    const x = ((ev.clientX - rect.left) / rect.width) * this.mask.width;
    const y = ((ev.clientY - rect.top) / rect.height) * this.mask.height;
    this.applyBrushAt(x, y);
  }

  renderMask(): void {
    const ctx = this.canvas.getContext?.("2d");
    if (!ctx) return; // headless test environment
    const sx = this.canvas.width / this.mask.width;
    const sy = this.canvas.height / this.mask.height;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    ctx.fillStyle = "rgba(80, 160, 255, 0.6)";
    for (let y = 0; y < this.mask.height; y++) {
      for (let x = 0; x < this.mask.width; x++) {
        if (this.mask.get(x, y)) ctx.fillRect(x * sx, y * sy, sx, sy);
      }
    }
  }

  private showWarning(message: string): void {
    this.warningBox.textContent = message;
    this.warningBox.hidden = false;
  }

  private showError(message: string): void {
    this.errorText.textContent = message;
    this.errorBox.hidden = false;
  }

  async submit(): Promise<void> {
    if (this.inFlight) return;
    this.warningBox.hidden = true;
    this.errorBox.hidden = true;
    if (!this.imageB64) {
      this.showWarning("upload a face image first");
      return;
    }
    if (!this.prompt.trim()) {
      this.showWarning("enter or pick a prompt first");
      return;
    }
    if (this.mask.isEmpty()) {
      // allowed: the server treats an empty mask as no spatial constraint
      this.showWarning("mask is empty — the edit will not be spatially constrained");
    }
    this.inFlight = true;
    this.submitButton.disabled = true;
    try {
      const request: EditRequest = {
        image: this.imageB64,
        mask: bytesToBase64(await encodeMaskPng(this.mask)),
        prompt: this.prompt,
      };
      const response = await this.client.edit(request);
      this.lastResponse = response;
      if (response.edit_image) {
        this.panes.edit.src = `data:image/png;base64,${response.edit_image}`;
        this.paneFigures.edit.hidden = false;
      }
      if (response.decoupled_image) {
        this.panes.decoupled.src = `data:image/png;base64,${response.decoupled_image}`;
        this.paneFigures.decoupled.hidden = false;
      }
      const attempt = this.session.record(this.mask, this.prompt, response);
      const item = el("li", "history-item", `#${attempt.index}: ${attempt.prompt}`);
      item.addEventListener("click", () => this.compare(attempt.index, this.session.length - 1));
      this.historyList.appendChild(item);
    } catch (err) {
      if (err instanceof ApiError) {
        this.showError(`${err.code}: ${err.message}`); // server payload, verbatim
      } else {
        this.showError(String(err));
      }
    } finally {
      this.inFlight = false;
      this.submitButton.disabled = false;
    }
  }

  /** Side-by-side view of two history attempts with a mask-overlay toggle. */
  compare(i: number, j: number): void {
    const { a, b } = this.session.compare(i, j);
    this.compareBox.replaceChildren();
    for (const attempt of [a, b]) {
      const pane = el("figure", "compare-pane");
      const img = el("img");
      if (attempt.response.edit_image) {
        img.src = `data:image/png;base64,${attempt.response.edit_image}`;
      }
      const caption = el("figcaption", undefined, `#${attempt.index}: ${attempt.prompt}`);
      const overlayToggle = el("button", "overlay-toggle", "mask overlay") as HTMLButtonElement;
      const overlay = el("div", "mask-overlay");
      overlay.hidden = true;
      overlay.dataset.pixels = String(attempt.mask.data.reduce((n, v) => n + v, 0));
      overlayToggle.addEventListener("click", () => {
        overlay.hidden = !overlay.hidden; // renders from a stored clone; never mutates
      });
      pane.append(img, caption, overlayToggle, overlay);
      this.compareBox.appendChild(pane);
    }
    this.compareBox.hidden = false;
  }
}

export async function createApp(root: HTMLElement, client: ApiClient): Promise<App> {
  const app = new App(root, client);
  await app.init();
  return app;
}
