import init, { shift_flow, intruder_roc, adaptive_trace } from "./pkg/aad_demo.js";

const $ = (id) => document.getElementById(id);
const ZOOM = 3;

function paint(canvas, rgba, w, h) {
  canvas.width = w * ZOOM;
  canvas.height = h * ZOOM;
  const tmp = new OffscreenCanvas(w, h);
  tmp.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), w, h), 0, 0);
  const ctx = canvas.getContext("2d");
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);
}

function updateShift() {
  const dx = +$("dx").value, dy = +$("dy").value;
  $("dxv").textContent = dx;
  $("dyv").textContent = dy;
  const r = shift_flow(dx, dy, +$("shift-seed").value >>> 0);
  paint($("frame"), r.frame(), r.width, r.height);
  paint($("flow"), r.rgba(), r.width, r.height);
  $("shift-out").textContent =
    `mean flow (${r.mean_vx.toFixed(3)}, ${r.mean_vy.toFixed(3)})  endpoint error ${r.epe.toFixed(3)} px`;
  r.free();
}

function runRoc() {
  $("roc-out").textContent = "computing...";
  setTimeout(() => {
    let v;
    try {
      v = intruder_roc(+$("speed").value, +$("roc-seed").value >>> 0);
    } catch (e) {
      $("roc-out").textContent = String(e);
      return;
    }
    const pts = [];
    let text = "k    tpr    fpr\n";
    for (let i = 0; i + 2 < v.length; i += 3) {
      pts.push([v[i + 2], v[i + 1]]);
      text += `${v[i]}  ${v[i + 1].toFixed(3)}  ${v[i + 2].toFixed(3)}\n`;
    }
    $("roc-out").textContent = text + `auc ${v[v.length - 1].toFixed(4)}`;
    const c = $("roc"), ctx = c.getContext("2d"), s = c.width - 20;
    ctx.clearRect(0, 0, c.width, c.height);
    ctx.strokeStyle = "#bbb";
    ctx.strokeRect(10, 10, s, s);
    ctx.beginPath();
    ctx.moveTo(10, 10 + s);
    ctx.lineTo(10 + s, 10);
    ctx.stroke();
    pts.push([0, 0]);
    pts.unshift([1, 1]);
    ctx.strokeStyle = "#c00";
    ctx.beginPath();
    pts.forEach(([x, y], i) => (i ? ctx.lineTo : ctx.moveTo).call(ctx, 10 + x * s, 10 + (1 - y) * s));
    ctx.stroke();
  }, 0);
}

function updateTrace() {
  const xs = $("samples").value.split(/[\s,]+/).filter(Boolean).map(Number);
  try {
    const t = adaptive_trace(Float64Array.from(xs), +$("adapt-from").value);
    let text = "i  x      mean     std      count\n";
    for (let i = 0; i < xs.length; i++) {
      const [m, sd, n] = t.slice(3 * i, 3 * i + 3);
      text += `${i}  ${String(xs[i]).padEnd(6)} ${m.toFixed(4).padEnd(8)} ${sd.toFixed(4).padEnd(8)} ${n}\n`;
    }
    $("trace-out").textContent = text;
  } catch (e) {
    $("trace-out").textContent = String(e);
  }
}

await init();
$("status").textContent = "";
for (const id of ["dx", "dy", "shift-seed"]) $(id).addEventListener("input", updateShift);
for (const id of ["samples", "adapt-from"]) $(id).addEventListener("input", updateTrace);
$("roc-run").addEventListener("click", runRoc);
updateShift();
updateTrace();
runRoc();
