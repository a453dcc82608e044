// DOM wiring for the editing loop: upload, edit, submit, inspect history.

import { ApiClient } from "./api.js";
import { basicPoseGallery, historyView, poseOverlay } from "./render.js";
import { EditSession } from "./session.js";

const SERVICE_URL =
  new URLSearchParams(window.location.search).get("service") ?? "http://127.0.0.1:8000";

const client = new ApiClient(SERVICE_URL);
const session = new EditSession(client);
let poseFrame: [number, number] = [128, 64]; // updated from the service's basic poses

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const fileInput = el<HTMLInputElement>("reference-file");
const referencePreview = el<HTMLImageElement>("reference-preview");
const captionBox = el<HTMLTextAreaElement>("caption");
const submitButton = el<HTMLButtonElement>("submit");
const errorBanner = el<HTMLDivElement>("error-banner");
const historyList = el<HTMLDivElement>("history");
const gallery = el<HTMLDivElement>("basic-poses");
const statusLine = el<HTMLDivElement>("status");

fileInput.addEventListener("change", () => {
  const file = fileInput.files?.[0];
  if (!file) return;
  const reader = new FileReader();
  reader.onload = () => {
    const dataUrl = reader.result as string;
    const base64 = dataUrl.slice(dataUrl.indexOf(",") + 1);
    session.setReference(base64);
    referencePreview.src = dataUrl;
  };
  reader.readAsDataURL(file);
});

captionBox.addEventListener("input", () => session.setDraft(captionBox.value));
submitButton.addEventListener("click", () => void session.submit());
captionBox.addEventListener("keydown", (event) => {
  if (event.key === "Enter" && (event.ctrlKey || event.metaKey)) void session.submit();
});

function drawPoseOverlay(canvas: HTMLCanvasElement, pose: number[][], frame: [number, number]) {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const overlay = poseOverlay(pose, frame, canvas.width, canvas.height);
  ctx.strokeStyle = "#2dd4bf";
  ctx.lineWidth = 1.5;
  for (const seg of overlay.segments) {
    ctx.beginPath();
    ctx.moveTo(seg.x1, seg.y1);
    ctx.lineTo(seg.x2, seg.y2);
    ctx.stroke();
  }
  ctx.fillStyle = "#f87171";
  for (const point of overlay.points) {
    ctx.beginPath();
    ctx.arc(point.x, point.y, 2, 0, 2 * Math.PI);
    ctx.fill();
  }
}

session.onChange((state) => {
  submitButton.disabled = state.inFlight;
  statusLine.textContent = state.inFlight ? "synthesizing…" : "";
  if (captionBox.value !== state.draftCaption) captionBox.value = state.draftCaption;
  errorBanner.textContent = state.error ?? "";
  errorBanner.style.display = state.error ? "block" : "none";

  historyList.replaceChildren();
  const items = historyView(state);
  for (const item of [...items].reverse()) {
    const card = document.createElement("div");
    card.className = "card";

    const caption = document.createElement("div");
    caption.className = "caption";
    for (const token of item.diff) {
      if (token.kind === "removed") continue;
      const span = document.createElement("span");
      span.textContent = token.text + " ";
      if (token.kind === "added") span.className = "added";
      caption.appendChild(span);
    }
    card.appendChild(caption);

    const row = document.createElement("div");
    row.className = "result-row";
    const img = document.createElement("img");
    img.src = `data:image/png;base64,${item.image}`;
    img.width = 128;
    img.height = 256;
    img.alt = item.caption;
    img.addEventListener("click", () => {
      // feed the result back as the next reference (the iterative loop)
      session.setReference(item.image);
      referencePreview.src = img.src;
    });
    row.appendChild(img);
    if (item.pose) {
      const canvas = document.createElement("canvas");
      canvas.width = 128;
      canvas.height = 256;
      canvas.className = "pose-overlay";
      row.appendChild(canvas);
      drawPoseOverlay(canvas, item.pose, poseFrame);
    }
    card.appendChild(row);

    const meta = document.createElement("div");
    meta.className = "meta";
    meta.textContent = `#${item.index + 1} · orientation ${item.orientation} · ${item.latencyMs.toFixed(0)} ms`;
    card.appendChild(meta);
    historyList.appendChild(card);
  }
});

async function loadGallery() {
  try {
    const basics = await client.basicPoses();
    poseFrame = basics.frame;
    gallery.replaceChildren();
    for (const view of basicPoseGallery(basics)) {
      const tile = document.createElement("div");
      tile.className = "pose-tile";
      const canvas = document.createElement("canvas");
      canvas.width = 48;
      canvas.height = 96;
      tile.appendChild(canvas);
      drawPoseOverlay(canvas, view.pose, view.frame);
      const label = document.createElement("div");
      label.textContent = view.phrase;
      tile.appendChild(label);
      tile.addEventListener("click", () => {
        session.insertPhrase(view.phrase);
      });
      gallery.appendChild(tile);
    }
  } catch {
    gallery.textContent = "basic poses unavailable (service still loading?)";
  }
}

async function checkHealth() {
  try {
    const health = await client.health();
    statusLine.textContent = `service ok · model ${health.model_version.slice(0, 8)}`;
  } catch {
    statusLine.textContent = `cannot reach service at ${SERVICE_URL}`;
  }
}

void checkHealth();
void loadGallery();
