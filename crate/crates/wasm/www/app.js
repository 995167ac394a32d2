import init, { Demo } from "./pkg/trialink_wasm.js";

const METHODS = [
  "term-binary-cosine", "term-binary-jaccard", "term-binary-euclidean",
  "term-tfidf-cosine", "term-tfidf-euclidean",
  "concept-binary-cosine", "concept-binary-jaccard", "concept-binary-euclidean",
  "concept-tfidf-cosine", "concept-tfidf-euclidean",
];
const COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

const $ = (id) => document.getElementById(id);
let demo = null;
let registrations = [];

function status(text, isError = false) {
  $("status").textContent = text;
  $("status").className = isError ? "error" : "";
}

function cell(tr, text, cls) {
  const td = tr.insertCell();
  td.textContent = text;
  if (cls) td.className = cls;
}

function fill(tbody, rows, render) {
  tbody.replaceChildren();
  for (const row of rows) render(tbody.insertRow(), row);
}

function representation() {
  return document.querySelector("input[name=rep]:checked").value;
}

function selected() {
  return registrations.find((r) => r.nct_id === $("registration").value);
}

function explore() {
  const text = $("query").value;
  try {
    const ex = JSON.parse(demo.explore(text, representation()));
    $("feature-summary").textContent =
      `${ex.tokens} tokens, ${ex.kept.length} features in the vocabulary of ${ex.vocabulary_size} (N = ${ex.n_articles} articles)`;
    fill($("features").tBodies[0], ex.kept, (tr, f) => {
      cell(tr, f.feature); cell(tr, f.tf); cell(tr, f.df); cell(tr, f.tfidf.toFixed(4));
    });
    $("dropped").textContent = ex.dropped.length ? `pruned: ${ex.dropped.join(" ")}` : "";
  } catch (e) {
    $("feature-summary").textContent = String(e);
  }
}

function rank() {
  const reg = selected();
  const k = Math.max(1, Number($("k").value) || 10);
  const tbody = $("ranking").tBodies[0];
  try {
    const r = JSON.parse(demo.rankText($("query").value, $("method").value, k, reg ? reg.nct_id : undefined));
    const order = r.higher_is_better ? "higher is closer" : "lower is closer";
    const where = r.planted_rank ? `planted article at rank ${r.planted_rank}` : "planted article not ranked";
    $("rank-summary").textContent = `${r.config}: ${order}; ${where}`;
    fill(tbody, r.rows, (tr, row) => {
      if (row.planted) tr.className = "planted";
      cell(tr, row.rank); cell(tr, row.pmid); cell(tr, row.score.toFixed(5)); cell(tr, row.title, "title");
    });
  } catch (e) {
    tbody.replaceChildren();
    $("rank-summary").textContent = String(e);
  }
}

function update() {
  explore();
  rank();
}

function drawCurves() {
  const maxN = Math.max(5, Number($("max-n").value) || 50);
  const curves = JSON.parse(demo.curves(maxN));
  const canvas = $("curves");
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = { l: 48, r: 200, t: 12, b: 34 };
  const x = (n) => pad.l + ((n - 1) / Math.max(1, maxN - 1)) * (w - pad.l - pad.r);
  const y = (v) => h - pad.b - v * (h - pad.t - pad.b);
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.font = "11px system-ui";
  ctx.beginPath();
  ctx.moveTo(pad.l, pad.t); ctx.lineTo(pad.l, h - pad.b); ctx.lineTo(w - pad.r, h - pad.b);
  ctx.stroke();
  for (let v = 0; v <= 1.0001; v += 0.25) {
    ctx.fillText(`${Math.round(v * 100)}%`, 8, y(v) + 4);
  }
  for (const n of [1, Math.round(maxN / 2), maxN]) {
    ctx.fillText(String(n), x(n) - 6, h - pad.b + 16);
  }
  ctx.fillText("articles inspected", (w - pad.r) / 2, h - 4);
  curves.forEach((c, i) => {
    ctx.strokeStyle = COLORS[i % COLORS.length];
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    c.points.forEach(([n, r], j) => (j ? ctx.lineTo(x(n), y(r)) : ctx.moveTo(x(n), y(r))));
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillRect(w - pad.r + 12, pad.t + i * 16, 10, 10);
    ctx.fillText(c.config, w - pad.r + 28, pad.t + i * 16 + 9);
  });
  fill($("summary").tBodies[0], curves, (tr, c) => {
    cell(tr, c.config); cell(tr, c.median_rank); cell(tr, `${c.first_ranked_pct.toFixed(1)}%`);
    cell(tr, `${c.recall_at_50_pct.toFixed(1)}%`);
  });
}

function loadRegistration() {
  const reg = selected();
  if (reg) $("query").value = demo.registrationText(reg.nct_id);
  update();
}

function generate() {
  const form = new FormData($("corpus"));
  status("generating…");
  // Let the status paint before the synchronous build.
  setTimeout(() => {
    try {
      const t0 = performance.now();
      demo?.free();
      demo = new Demo(BigInt(form.get("seed")), Number(form.get("articles")), Number(form.get("registrations")));
      registrations = JSON.parse(demo.registrations());
      const sel = $("registration");
      sel.replaceChildren(...registrations.map((r) => new Option(`${r.nct_id}  ${r.title.slice(0, 60)}`, r.nct_id)));
      status(`${registrations.length} registrations, ${form.get("articles")} articles, built in ${Math.round(performance.now() - t0)} ms`);
      loadRegistration();
      drawCurves();
    } catch (e) {
      status(String(e), true);
    }
  }, 10);
}

await init();
$("method").replaceChildren(...METHODS.map((m) => new Option(m, m)));
$("method").value = "term-tfidf-cosine";
$("corpus").addEventListener("submit", (e) => { e.preventDefault(); generate(); });
$("registration").addEventListener("change", loadRegistration);
$("query").addEventListener("input", update);
$("method").addEventListener("change", rank);
$("k").addEventListener("input", rank);
document.querySelectorAll("input[name=rep]").forEach((el) => el.addEventListener("change", explore));
$("draw").addEventListener("click", drawCurves);
generate();
