import init, { solve_instance, rho_curve, ris_power_budget } from "./pkg/iscap_web.js";

const $ = (id) => document.getElementById(id);

function params() {
  return {
    protocol: $("protocol").value,
    rho: Number($("rho").value),
    ntx: Number($("ntx").value),
    nris: Number($("nris").value),
    seed: BigInt($("seed").value || 0),
    rcom: Number($("rcom").value),
    rsense: Number($("rsense").value),
    emin: Number($("emin").value),
  };
}

function showError(el, e) {
  el.textContent = String(e);
  el.classList.add("err");
}

function updateBudget() {
  const p = params();
  const el = $("budget");
  try {
    const b = JSON.parse(ris_power_budget(p.protocol, p.rho, p.nris));
    el.classList.remove("err");
    el.textContent =
      `required      ${b.required_mw.toFixed(3)} mW\n` +
      `reflecting    ${b.reflecting} elements, amplitude ${b.amplitude.toFixed(3)}\n` +
      `harvesting    ${b.harvesting} elements\n` +
      `time share    ${b.time_share}\n` +
      `realised rho  ${b.realized_rho}`;
  } catch (e) {
    showError(el, e);
  }
}

// Let the browser paint the "running" text before the blocking wasm call.
const nextFrame = () => new Promise((r) => setTimeout(r, 20));

async function solve() {
  const p = params();
  const el = $("solve-out");
  el.classList.remove("err");
  el.textContent = "running...";
  await nextFrame();
  try {
    const s = JSON.parse(solve_instance(p.protocol, p.rho, p.ntx, p.nris, p.seed, p.rcom, p.rsense, p.emin));
    el.textContent =
      `status        ${s.status}\n` +
      `power         ${s.power_dbm.toFixed(3)} dBm after ${s.ao_iterations} AO iterations\n` +
      `trace [dBm]   ${s.trace_dbm.map((v) => v.toFixed(2)).join(" ")}\n` +
      `rates         ${s.comm_rates.map((v) => v.toFixed(3)).join(", ")} bps/Hz\n` +
      `sensing rate  ${s.sense_rate.toFixed(3)} bps/Hz\n` +
      `harvested     ${s.wpt_mw.toFixed(4)} mW at the energy receivers\n` +
      `RIS surplus   ${s.ris_surplus_mw.toFixed(4)} mW`;
  } catch (e) {
    showError(el, e);
  }
}

function plot(rhos, ys) {
  const cv = $("plot");
  const ctx = cv.getContext("2d");
  ctx.clearRect(0, 0, cv.width, cv.height);
  const finite = ys.filter(Number.isFinite);
  if (finite.length === 0) return;
  const lo = Math.min(...finite) - 0.5;
  const hi = Math.max(...finite) + 0.5;
  const pad = 40;
  const x = (r) => pad + r * (cv.width - 2 * pad);
  const y = (v) => cv.height - pad - ((v - lo) / (hi - lo)) * (cv.height - 2 * pad);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, cv.width - 2 * pad, cv.height - 2 * pad);
  ctx.fillStyle = "#000";
  ctx.fillText(`${hi.toFixed(1)} dBm`, 2, pad);
  ctx.fillText(`${lo.toFixed(1)} dBm`, 2, cv.height - pad);
  ctx.fillText("rho", cv.width / 2, cv.height - 10);
  ctx.strokeStyle = "#1f5fbf";
  ctx.beginPath();
  let pen = false;
  rhos.forEach((r, i) => {
    if (!Number.isFinite(ys[i])) {
      pen = false;
      return;
    }
    if (pen) ctx.lineTo(x(r), y(ys[i]));
    else ctx.moveTo(x(r), y(ys[i]));
    pen = true;
  });
  ctx.stroke();
  rhos.forEach((r, i) => {
    if (Number.isFinite(ys[i])) ctx.fillRect(x(r) - 2, y(ys[i]) - 2, 4, 4);
  });
}

async function curve() {
  const p = params();
  const st = $("curve-status");
  st.classList.remove("err");
  st.textContent = "running...";
  await nextFrame();
  try {
    const n = 9;
    const ys = Array.from(rho_curve(p.protocol, p.ntx, p.nris, p.seed, n, p.rcom, p.rsense, p.emin));
    const rhos = ys.map((_, i) => (i + 1) / (n + 1));
    plot(rhos, ys);
    const best = ys.reduce((b, v, i) => (Number.isFinite(v) && (b < 0 || v < ys[b]) ? i : b), -1);
    st.textContent = best < 0 ? "no feasible point" : `minimum ${ys[best].toFixed(2)} dBm at rho = ${rhos[best].toFixed(1)}`;
  } catch (e) {
    showError(st, e);
  }
}

await init();
for (const id of ["protocol", "rho", "nris"]) $(id).addEventListener("input", updateBudget);
$("solve").addEventListener("click", solve);
$("curve").addEventListener("click", curve);
updateBudget();
