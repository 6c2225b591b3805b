import init, { catWigner, catTransfer, transferWigner, memoryCoefficient } from "./pkg/cavity_qsd_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);
const status = $("status");

function report(e) {
  status.textContent = String(e);
  status.className = "err";
}

// Diverging map: blue for negative, red for positive, white at zero.
function drawWigner(canvas, values, points) {
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(points, points);
  const scale = Math.max(...values.map(Math.abs)) || 1;
  for (let j = 0; j < points; j++) {
    for (let i = 0; i < points; i++) {
      const v = values[j * points + i] / scale;
      const k = 4 * ((points - 1 - j) * points + i);
      const w = Math.round(255 * (1 - Math.abs(v)));
      img.data[k] = v > 0 ? 255 : w;
      img.data[k + 1] = w;
      img.data[k + 2] = v < 0 ? 255 : w;
      img.data[k + 3] = 255;
    }
  }
  const tmp = document.createElement("canvas");
  tmp.width = tmp.height = points;
  tmp.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);
}

// Line plot of several series sharing one x axis.
function drawLines(canvas, xs, series, colors) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 30;
  ctx.clearRect(0, 0, w, h);
  const all = series.flat();
  let lo = Math.min(0, ...all), hi = Math.max(...all);
  if (hi === lo) hi = lo + 1;
  const x0 = xs[0], x1 = xs[xs.length - 1];
  const px = (x) => pad + ((x - x0) / (x1 - x0)) * (w - 2 * pad);
  const py = (y) => h - pad - ((y - lo) / (hi - lo)) * (h - 2 * pad);
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.moveTo(pad, py(0)); ctx.lineTo(w - pad, py(0));
  ctx.moveTo(pad, pad); ctx.lineTo(pad, h - pad);
  ctx.stroke();
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(hi.toFixed(2), 2, pad);
  ctx.fillText(lo.toFixed(2), 2, h - pad);
  ctx.fillText(x1.toFixed(1), w - pad - 10, h - 8);
  series.forEach((ys, s) => {
    ctx.strokeStyle = colors[s];
    ctx.beginPath();
    ys.forEach((y, i) => (i ? ctx.lineTo(px(xs[i]), py(y)) : ctx.moveTo(px(xs[i]), py(y))));
    ctx.stroke();
  });
  return { px, x0, x1, pad, w };
}

function columns(flat, width) {
  const cols = Array.from({ length: width }, () => []);
  for (let k = 0; k < flat.length; k++) cols[k % width].push(flat[k]);
  return cols;
}

const WIGNER_POINTS = 81;

function runCatWigner() {
  const w = catWigner(num("cw-re"), num("cw-im"), 3.0, WIGNER_POINTS);
  drawWigner($("cw-plot"), Array.from(w), WIGNER_POINTS);
}

let transferAxes = null;

function runTransfer() {
  const rows = catTransfer(num("ct-gamma"), num("ct-lambda"), num("ct-alpha"), num("ct-tmax"), 0.1);
  const [t, f1, f2] = columns(Array.from(rows), 5);
  transferAxes = drawLines($("ct-plot"), t, [f1, f2], ["#1f5fbf", "#c0392b"]);
}

function runTransferWigner(ev) {
  if (!transferAxes) return;
  const { x0, x1, pad, w } = transferAxes;
  const frac = (ev.offsetX - pad) / (w - 2 * pad);
  const t = Math.min(x1, Math.max(0.02, x0 + frac * (x1 - x0)));
  const v = transferWigner(num("ct-gamma"), num("ct-lambda"), num("ct-alpha"), t, 3.0, WIGNER_POINTS);
  drawWigner($("ct-wigner"), Array.from(v), WIGNER_POINTS);
}

function runMemory() {
  const rows = memoryCoefficient(num("mc-gamma"), num("mc-omega"), num("mc-tmax"), 0.01);
  const [t, re, im] = columns(Array.from(rows), 3);
  drawLines($("mc-plot"), t, [re, im], ["#1f5fbf", "#c0392b"]);
}

function guarded(f) {
  return (ev) => {
    try {
      f(ev);
      status.textContent = "ready";
      status.className = "";
    } catch (e) {
      report(e);
    }
  };
}

init()
  .then(() => {
    $("cw-go").onclick = guarded(runCatWigner);
    $("ct-go").onclick = guarded(runTransfer);
    $("ct-plot").onclick = guarded(runTransferWigner);
    $("mc-go").onclick = guarded(runMemory);
    guarded(runCatWigner)();
    guarded(runMemory)();
  })
  .catch(report);
