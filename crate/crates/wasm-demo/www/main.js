import init, { surface, regions, volatility } from "./pkg/latency_regions_demo.js";

const num = (el) => Number(el.value);
const seed = () => num(document.getElementById("seed"));
const points = () => num(document.getElementById("points"));

function show(id, run) {
  const out = document.getElementById(id);
  const t0 = performance.now();
  try {
    const svg = run();
    const ms = (performance.now() - t0).toFixed(0);
    out.innerHTML = `${svg}<div class="status">${ms} ms</div>`;
  } catch (e) {
    out.innerHTML = `<div class="error">${e.message ?? e}</div>`;
  }
}

function bind(id, run) {
  const form = document.getElementById(`${id}-form`);
  const go = () => show(`${id}-out`, () => run(form.elements));
  form.addEventListener("submit", (e) => {
    e.preventDefault();
    go();
  });
  return go;
}

await init();

const views = [
  bind("surface", (f) => surface(seed(), points(), f.method.value, num(f.param))),
  bind("regions", (f) => regions(seed(), points(), num(f.n), num(f.floor), f.objective.value)),
  bind("volatility", (f) => volatility(seed(), points(), num(f.n), num(f.floor), num(f.b))),
];

document.querySelector("#surface-form select").addEventListener("change", (e) => {
  const param = e.target.form.elements.param;
  param.value = { idw: 2, "idw-global": 2, loess: 0.3, stbkr: 2 }[e.target.value];
});

views.forEach((v) => v());
