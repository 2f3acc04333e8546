// Vibration template list with 1-7 rating controls and a best-rated badge.

import { Client } from './api.js';
import type { TemplateJson } from './types.js';

export class VibrationPanel {
  constructor(
    private client: Client,
    private container: HTMLElement,
  ) {}

  async load(buttonId: string): Promise<void> {
    this.container.innerHTML = '';
    const { templates, best_template_id, ratings } = await this.client.getTemplates(buttonId);
    if (templates.length === 0) {
      this.container.textContent = 'no vibration descriptor on this model';
      return;
    }
    templates.forEach((template) =>
      this.container.appendChild(
        this.row(buttonId, template, best_template_id, ratings?.[template.template_id]?.score),
      ),
    );
  }

  private row(
    buttonId: string,
    template: TemplateJson,
    bestId: string | null,
    score: number | undefined,
  ): HTMLElement {
    const row = document.createElement('div');
    row.className = 'template-row';
    row.dataset.templateId = template.template_id;

    const label = document.createElement('span');
    label.className = 'template-label';
    label.textContent =
      `${template.frequency_hz.toFixed(0)} Hz / ${template.duration_ms.toFixed(0)} ms ` +
      `-> ±${template.amplitude_end_v.toFixed(1)} V`;
    row.appendChild(label);

    if (template.template_id === bestId) {
      const badge = document.createElement('span');
      badge.className = 'badge';
      badge.textContent = 'best';
      row.appendChild(badge);
    }

    const select = document.createElement('select');
    const blank = document.createElement('option');
    blank.value = '';
    blank.textContent = score !== undefined ? `rated ${score}` : 'rate';
    select.appendChild(blank);
    for (let s = 1; s <= 7; s++) {
      const option = document.createElement('option');
      option.value = String(s);
      option.textContent = String(s);
      select.appendChild(option);
    }
    select.addEventListener('change', async () => {
      if (!select.value) return;
      await this.client.rateTemplate(buttonId, template.template_id, Number(select.value));
      await this.load(buttonId); // refresh badge placement
    });
    row.appendChild(select);
    return row;
  }
}
