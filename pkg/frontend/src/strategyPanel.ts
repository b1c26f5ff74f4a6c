/**
 * Strategy panel: savings gauge, reduced-OD table, and transit segment load
 * bars. Marginal and uniform evaluations render side by side at the same
 * removed total; the over-capacity highlight comes straight from the
 * service's flag, never from a local threshold.
 */

import type { WhatIfPayload } from './types.js';

const escapeHtml = (value: unknown): string =>
  String(value ?? '')
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');

const gauge = (payload: WhatIfPayload): string => {
  const savings = payload.savings;
  const caution = !payload.converged
    ? '<div class="caution-badge" data-role="caution">solver did not converge; treat as indicative</div>'
    : '';
  return `
<div class="savings-gauge" data-mode="${escapeHtml(payload.params.mode)}">
  ${caution}
  <div class="gauge-value" data-role="savings" data-value="${savings.savings_pct}">
    ${savings.savings_pct.toFixed(2)}%
  </div>
  <div class="gauge-caption">collective time saved</div>
  <dl class="gauge-details">
    <dt>removed</dt>
    <dd data-role="removed" data-value="${savings.removed_vph}">
      ${savings.removed_vph.toFixed(1)} veh/h (${savings.removed_share_pct.toFixed(2)}% of demand)
    </dd>
    <dt>speed</dt>
    <dd data-role="speed">
      ${savings.speed_before_kmh.toFixed(2)} &rarr; ${savings.speed_after_kmh.toFixed(2)} km/h
    </dd>
  </dl>
</div>`;
};

const reductionsTable = (payload: WhatIfPayload): string => {
  if (payload.reductions.length === 0) {
    return '<p class="strategy-empty">no eligible trips reduced</p>';
  }
  const rows = payload.reductions
    .map(
      (row) => `
  <tr data-od="${escapeHtml(row.origin)}-${escapeHtml(row.dest)}">
    <td>${escapeHtml(row.origin)} &rarr; ${escapeHtml(row.dest)}</td>
    <td data-role="removed-vph" data-value="${row.removed_vph}">${row.removed_vph.toFixed(1)}</td>
    <td data-role="mc" data-value="${row.mc_p_min}">${row.mc_p_min.toFixed(2)}</td>
  </tr>`,
    )
    .join('');
  return `
<table class="reductions-table">
  <thead><tr><th>trip</th><th>removed veh/h</th><th>marginal cost min</th></tr></thead>
  <tbody>${rows}</tbody>
</table>`;
};

const segmentBars = (payload: WhatIfPayload): string => {
  if (payload.segments.length === 0) {
    return '<p class="strategy-empty">no transit segments affected</p>';
  }
  const maxDelta = Math.max(...payload.segments.map((s) => s.delta_persons), 1);
  const bars = payload.segments
    .map((segment) => {
      const width = Math.max(2, (segment.delta_persons / maxDelta) * 100);
      const cls = segment.over_capacity ? 'segment-bar over-capacity' : 'segment-bar';
      return `
  <div class="segment-row" data-segment="${escapeHtml(segment.line_id)}:${escapeHtml(
    segment.from_station,
  )}-${escapeHtml(segment.to_station)}">
    <span class="segment-name">${escapeHtml(segment.line_id)} ${escapeHtml(
      segment.from_station,
    )} &rarr; ${escapeHtml(segment.to_station)}</span>
    <span class="${cls}" style="width:${width.toFixed(1)}%"
          data-value="${segment.delta_persons}"
          data-over-capacity="${segment.over_capacity}"></span>
    <span class="segment-value">+${segment.delta_persons.toFixed(0)} pers/h${
      segment.over_capacity ? ' (over capacity)' : ''
    }</span>
  </div>`;
    })
    .join('');
  return `<div class="segment-bars">${bars}</div>`;
};

const column = (payload: WhatIfPayload): string => `
<section class="strategy-column" data-mode="${escapeHtml(payload.params.mode)}">
  <h3>${escapeHtml(payload.params.mode)}</h3>
  ${gauge(payload)}
  ${reductionsTable(payload)}
  ${segmentBars(payload)}
</section>`;

export const renderStrategyPanel = (
  container: HTMLElement,
  marginal: WhatIfPayload,
  uniform: WhatIfPayload | null,
): void => {
  const columns = [column(marginal)];
  if (uniform !== null) {
    columns.push(column(uniform));
  }
  container.innerHTML = `<div class="strategy-columns">${columns.join('')}</div>`;
};

export const renderStrategyError = (container: HTMLElement, message: string): void => {
  container.innerHTML = `<div class="error-banner">${escapeHtml(message)}</div>`;
};
