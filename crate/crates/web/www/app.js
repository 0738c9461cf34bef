import init, { demo_moments, identified_set, breakdown, bounds } from "./pkg/regsens_web.js";

const $ = (id) => document.getElementById(id);
const fmt = (x) => (typeof x === "number" ? Number(x.toPrecision(6)).toString() : String(x));

function show(id, f) {
  const el = $(id);
  try {
    el.className = "";
    el.textContent = f();
  } catch (e) {
    el.className = "err";
    el.textContent = e.message ?? String(e);
  }
}

function drawCurve(curve, betaMed, roots, delta) {
  const c = $("curve");
  const g = c.getContext("2d");
  const W = c.width, H = c.height, pad = 40, clip = 5;
  g.clearRect(0, 0, W, H);
  if (curve.length === 0) return;
  const lo = curve[0].b, hi = curve[curve.length - 1].b;
  const x = (b) => pad + ((b - lo) / (hi - lo)) * (W - 2 * pad);
  const y = (d) => H - pad - ((d + clip) / (2 * clip)) * (H - 2 * pad);

  g.strokeStyle = "#bbb";
  g.beginPath();
  g.moveTo(pad, y(0)); g.lineTo(W - pad, y(0));
  if (lo < 0 && hi > 0) { g.moveTo(x(0), pad); g.lineTo(x(0), H - pad); }
  g.stroke();

  g.setLineDash([6, 4]);
  g.strokeStyle = "#c33";
  g.beginPath(); g.moveTo(pad, y(1)); g.lineTo(W - pad, y(1)); g.stroke();
  g.strokeStyle = "#36c";
  g.beginPath(); g.moveTo(x(betaMed), pad); g.lineTo(x(betaMed), H - pad); g.stroke();
  g.setLineDash([]);

  g.strokeStyle = "#999";
  g.beginPath(); g.moveTo(pad, y(delta)); g.lineTo(W - pad, y(delta)); g.stroke();

  g.strokeStyle = "#222";
  g.lineWidth = 1.5;
  g.beginPath();
  let pen = false;
  for (const p of curve) {
    if (p.gap || p.delta === null || Math.abs(p.delta) > clip) { pen = false; continue; }
    if (pen) g.lineTo(x(p.b), y(p.delta)); else g.moveTo(x(p.b), y(p.delta));
    pen = true;
  }
  g.stroke();
  g.lineWidth = 1;

  g.fillStyle = "#c60";
  for (const r of roots) {
    if (r < lo || r > hi) continue;
    g.beginPath(); g.arc(x(r), y(delta), 4, 0, 2 * Math.PI); g.fill();
  }

  g.fillStyle = "#444";
  g.font = "12px sans-serif";
  g.fillText(fmt(lo), pad - 10, H - pad + 16);
  g.fillText(fmt(hi), W - pad - 10, H - pad + 16);
  g.fillText("δ = 1", W - pad + 2, y(1) + 4);
  g.fillText(String(clip), 8, y(clip) + 4);
  g.fillText(String(-clip), 4, y(-clip) + 4);
  g.fillText("b", W / 2, H - 6);
}

function runIdset() {
  show("idset-out", () => {
    const delta = parseFloat($("delta").value);
    const r = JSON.parse(identified_set($("moments").value, $("rule").value, delta,
      parseFloat($("lo").value), parseFloat($("hi").value)));
    drawCurve(r.curve, r.beta_med, r.roots, delta);
    let s = `R²_long = ${fmt(r.r2long)}, beta_med = ${fmt(r.beta_med)}\n`;
    s += `set at δ = ${fmt(delta)}: {${r.roots.map(fmt).join(", ")}}`;
    if (r.excluded.length) s += ` (excluded: ${r.excluded.map(fmt).join(", ")})`;
    return s;
  });
}

function runBreakdown() {
  show("bp-out", () => {
    const mText = $("m").value.trim();
    const m = mText === "" || mText === "inf" ? Infinity : parseFloat(mText);
    const r = JSON.parse(breakdown($("moments").value, $("rule").value, m));
    const lines = [`R²_long = ${fmt(r.r2long)}, beta_med = ${fmt(r.beta_med)}`];
    if (r.explain_away) lines.push(`explain-away: ${fmt(r.explain_away.signed)} (magnitude ${fmt(r.explain_away.magnitude)})`);
    const sc = (v) => (v.precluded ? "precluded by the bound" : `${fmt(v.value)}${v.attained ? "" : " (limit, not attained)"}`);
    if (r.sign_change) lines.push(`sign-change, no bound: ${sc(r.sign_change)}`);
    if (r.sign_change_restricted) lines.push(`sign-change, M = ${fmt(m)}: ${sc(r.sign_change_restricted)}`);
    if (r.naive_incorrect !== null) lines.push(`naive approximation (incorrect): ${fmt(r.naive_incorrect)}`);
    for (const e of r.errors) lines.push(`note: ${e}`);
    return lines.join("\n");
  });
}

function runBounds() {
  show("bounds-out", () => {
    const r = JSON.parse(bounds($("moments").value, $("rule").value, parseFloat($("dbar").value)));
    return `${r.text}\ncontains 0: ${r.contains_zero ? "yes" : "no"}`;
  });
}

await init();
$("moments").value = JSON.stringify(JSON.parse(demo_moments()), null, 1);
$("run-idset").onclick = runIdset;
$("run-bp").onclick = runBreakdown;
$("run-bounds").onclick = runBounds;
for (const id of ["delta", "lo", "hi"]) $(id).oninput = runIdset;
runIdset();
runBreakdown();
runBounds();
