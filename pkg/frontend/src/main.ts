// Page bootstrap: wire the drop zone, file picker, explanation controls, and
// overlay settings to the controller.

import { ApiClient } from './api.js';
import { App } from './controller.js';
import { serviceBaseUrl } from './config.js';

function setup(): void {
  const root = document.body;
  const api = new ApiClient(serviceBaseUrl());
  const app = new App(api, root);

  const fileInput = document.getElementById('file-input') as HTMLInputElement;
  const dropZone = document.getElementById('drop-zone') as HTMLElement;
  const classSelect = document.getElementById('explain-class') as HTMLSelectElement;
  const methodSaliency = document.getElementById('method-saliency') as HTMLInputElement;
  const methodCam = document.getElementById('method-cam') as HTMLInputElement;
  const explainButton = document.getElementById('explain-toggle') as HTMLButtonElement;
  const overlayVisible = document.getElementById('overlay-visible') as HTMLInputElement;
  const opacity = document.getElementById('overlay-opacity') as HTMLInputElement;

  fileInput.addEventListener('change', () => {
    const file = fileInput.files?.[0];
    if (file) void app.uploadAndPredict(file);
  });

  dropZone.addEventListener('dragover', (event) => {
    event.preventDefault();
    dropZone.classList.add('dragging');
  });
  dropZone.addEventListener('dragleave', () => dropZone.classList.remove('dragging'));
  dropZone.addEventListener('drop', (event) => {
    event.preventDefault();
    dropZone.classList.remove('dragging');
    const file = event.dataTransfer?.files?.[0];
    if (file) void app.uploadAndPredict(file);
  });

  explainButton.addEventListener('click', () => {
    const classIndex = Number(classSelect.value);
    const method = methodCam.checked && !methodCam.disabled ? 'cam' : 'saliency';
    void app.toggleExplanation(classIndex, method);
  });
  methodSaliency.addEventListener('change', () => explainButton.click());
  methodCam.addEventListener('change', () => explainButton.click());

  overlayVisible.addEventListener('change', () => app.setOverlayVisible(overlayVisible.checked));
  opacity.addEventListener('input', () => app.setOverlayOpacity(Number(opacity.value) / 100));

  // populate the class selector from the service's own metadata
  void api
    .health()
    .then((info) => {
      classSelect.innerHTML = info.class_names
        .map((name, i) => `<option value="${i}">${name}</option>`)
        .join('');
    })
    .catch(() => {
      const banner = document.getElementById('error') as HTMLElement;
      banner.textContent = `cannot reach the prediction service at ${api.baseUrl}`;
      banner.style.display = 'block';
    });
}

document.addEventListener('DOMContentLoaded', setup);
