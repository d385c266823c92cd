// DOM rendering. Full re-render of the result panes from the view model; the
// page skeleton (ids referenced here) lives in index.html.

import { diagnosisVisible, type SessionViewModel } from './state.js';

function el<T extends HTMLElement>(root: HTMLElement, id: string): T {
  const node = root.querySelector<T>(`#${id}`);
  if (!node) throw new Error(`missing #${id} in page skeleton`);
  return node;
}

function pct(value: number): string {
  return `${(value * 100).toFixed(1)}%`;
}

export function render(root: HTMLElement, vm: SessionViewModel): void {
  renderError(root, vm);
  renderPreview(root, vm);
  renderVerdict(root, vm);
  renderBars(root, vm);
  renderOverlay(root, vm);
  el(root, 'busy').style.display = vm.busy ? 'block' : 'none';
}

function renderError(root: HTMLElement, vm: SessionViewModel): void {
  const banner = el(root, 'error');
  banner.style.display = vm.error ? 'block' : 'none';
  banner.textContent = vm.error ?? '';
}

function renderPreview(root: HTMLElement, vm: SessionViewModel): void {
  const img = el<HTMLImageElement>(root, 'preview');
  if (vm.previewUrl) {
    img.src = vm.previewUrl;
    img.style.display = 'block';
  } else {
    img.removeAttribute('src');
    img.style.display = 'none';
  }
}

function renderVerdict(root: HTMLElement, vm: SessionViewModel): void {
  const banner = el(root, 'verdict');
  const heatmap = el<HTMLImageElement>(root, 'rejection-heatmap');
  if (!vm.verdict) {
    banner.style.display = 'none';
    banner.className = '';
    heatmap.style.display = 'none';
    return;
  }
  banner.style.display = 'block';
  banner.className = vm.verdict.admitted ? 'verdict-admitted' : 'verdict-rejected';
  const score = vm.verdict.score.toFixed(4);
  const threshold = vm.verdict.threshold.toFixed(4);
  banner.textContent = vm.verdict.admitted
    ? `In distribution: ${vm.verdict.metric} ${score} passes the ${threshold} gate`
    : `Out of distribution: ${vm.verdict.metric} ${score} fails the ${threshold} gate: no diagnosis shown`;
  if (!vm.verdict.admitted && vm.verdict.error_map_png_base64) {
    heatmap.src = `data:image/png;base64,${vm.verdict.error_map_png_base64}`;
    heatmap.style.display = 'block';
  } else {
    heatmap.style.display = 'none';
  }
}

function renderBars(root: HTMLElement, vm: SessionViewModel): void {
  const panel = el(root, 'diagnosis');
  const bars = el(root, 'bars');
  if (!diagnosisVisible(vm)) {
    panel.style.display = 'none';
    bars.innerHTML = '';
    return;
  }
  panel.style.display = 'block';
  bars.innerHTML = (vm.predictions ?? [])
    .map((p) => {
      return `
      <div class="bar-row" data-class-name="${p.name}">
        <div class="bar-label">${p.name}</div>
        <div class="bar-track">
          <div class="bar-fill calibrated" style="width:${pct(p.calibrated_probability)}"></div>
          <div class="bar-fill raw" style="width:${pct(p.raw_probability)}"></div>
          <div class="op-marker" style="left:50%" title="operating point ${p.operating_point.toFixed(3)} maps to calibrated 0.5"></div>
        </div>
        <div class="bar-values">
          <span class="calibrated-value">${pct(p.calibrated_probability)}</span>
          <span class="raw-value">raw ${pct(p.raw_probability)}</span>
        </div>
      </div>`;
    })
    .join('');
}

function renderOverlay(root: HTMLElement, vm: SessionViewModel): void {
  const overlay = el<HTMLImageElement>(root, 'overlay');
  const label = el(root, 'overlay-label');
  const camOption = el<HTMLInputElement>(root, 'method-cam');
  camOption.disabled = vm.camDisabledReason !== null;
  camOption.title = vm.camDisabledReason ?? '';
  if (vm.explanation && vm.overlayVisible) {
    overlay.src = vm.explanation.overlayUrl;
    overlay.style.display = 'block';
    overlay.style.opacity = String(vm.overlayOpacity);
    label.textContent = `${vm.explanation.method} for class ${vm.explanation.classIndex}`;
  } else {
    overlay.removeAttribute('src');
    overlay.style.display = 'none';
    label.textContent = '';
  }
}
