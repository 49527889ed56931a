import init, { Scene } from "./pkg/nsegment_demo.js";

const SIZE = 128;
const $ = (id) => document.getElementById(id);
let scene = null;

function blit(id, rgba) {
  const canvas = $(id);
  canvas.width = SIZE;
  canvas.height = SIZE;
  const data = new ImageData(new Uint8ClampedArray(rgba), SIZE, SIZE);
  canvas.getContext("2d").putImageData(data, 0, 0);
}

function knobs() {
  for (const id of ["alpha", "sigma", "theta", "mag"]) {
    $(id + "-v").textContent = $(id).value;
  }
  return {
    alpha: Number($("alpha").value),
    sigma: Number($("sigma").value),
    theta: Number($("theta").value),
    plus: $("plus").checked,
    seed: Number($("seed").value) >>> 0,
  };
}

function loadScene() {
  if (scene) scene.free();
  scene = new Scene(SIZE, Number($("scene").value) >>> 0);
  blit("image", scene.image_rgba());
  blit("label", scene.label_rgba());
}

function renderDeform() {
  const k = knobs();
  blit("deformed", scene.deform(k.alpha, k.sigma, k.theta, k.plus, k.seed));
  blit("field", scene.field(k.alpha, k.sigma, k.theta, k.plus, k.seed));
  const frozen = k.plus ? Array.from(scene.suppressed(k.alpha, k.sigma, k.theta, k.seed)) : [];
  $("deformed-cap").textContent =
    "deformed label" + (frozen.length ? ` (frozen classes: ${frozen.join(", ")})` : "");
}

function renderNoise() {
  const kind = $("kind").value;
  const mag = Number($("mag").value);
  const seed = Number($("seed").value) >>> 0;
  blit("noisy", scene.perturb(kind, mag, seed));
  const score = scene.perturb_miou(kind, mag, seed);
  $("noisy-cap").textContent = `perturbed label, mIoU vs clean ${score.toFixed(3)}`;
}

function guarded(fn) {
  return () => {
    try {
      $("status").textContent = "";
      fn();
    } catch (e) {
      $("status").textContent = String(e);
    }
  };
}

const all = guarded(() => {
  renderDeform();
  renderNoise();
});

await init();
guarded(loadScene)();
all();

$("scene").addEventListener("change", guarded(() => {
  loadScene();
  renderDeform();
  renderNoise();
}));
for (const id of ["alpha", "sigma", "theta", "plus", "seed"]) {
  $(id).addEventListener("input", id === "seed" ? all : guarded(renderDeform));
}
for (const id of ["kind", "mag"]) {
  $(id).addEventListener("input", guarded(renderNoise));
}
