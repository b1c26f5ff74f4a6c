/**
 * Line chart of the commuter increment versus the selfish fraction, drawn
 * as inline SVG. The leftmost point is the habit scenario, the rightmost
 * the selfish one; the chart labels both.
 */

import type { SweepPayload } from './types.js';

const WIDTH = 420;
const HEIGHT = 220;
const PAD = 36;

export const renderSweepChart = (container: HTMLElement, payload: SweepPayload): void => {
  container.replaceChildren();
  const points = [...payload.points].sort((a, b) => a.lam - b.lam);
  if (points.length < 2) {
    const warning = document.createElement('div');
    warning.className = 'warning-badge';
    warning.textContent =
      points.length === 0
        ? 'no sweep data for this job'
        : 'only one sweep point; endpoints missing';
    container.appendChild(warning);
    return;
  }

  const values = points.map((p) => p.commuter_increment_pct);
  const minY = Math.min(...values);
  const maxY = Math.max(...values);
  const spanY = maxY - minY || 1;
  const x = (lam: number) => PAD + lam * (WIDTH - 2 * PAD);
  const y = (v: number) => HEIGHT - PAD - ((v - minY) / spanY) * (HEIGHT - 2 * PAD);

  const svgNs = 'http://www.w3.org/2000/svg';
  const svg = document.createElementNS(svgNs, 'svg');
  svg.setAttribute('viewBox', `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute('class', 'sweep-chart');

  const axis = document.createElementNS(svgNs, 'path');
  axis.setAttribute(
    'd',
    `M ${PAD} ${PAD} L ${PAD} ${HEIGHT - PAD} L ${WIDTH - PAD} ${HEIGHT - PAD}`,
  );
  axis.setAttribute('class', 'axis');
  svg.appendChild(axis);

  const line = document.createElementNS(svgNs, 'polyline');
  line.setAttribute(
    'points',
    points.map((p) => `${x(p.lam).toFixed(1)},${y(p.commuter_increment_pct).toFixed(1)}`).join(' '),
  );
  line.setAttribute('class', 'sweep-line');
  svg.appendChild(line);

  for (const point of points) {
    const dot = document.createElementNS(svgNs, 'circle');
    dot.setAttribute('cx', x(point.lam).toFixed(1));
    dot.setAttribute('cy', y(point.commuter_increment_pct).toFixed(1));
    dot.setAttribute('r', '4');
    dot.setAttribute('class', 'sweep-point');
    dot.dataset.lam = String(point.lam);
    dot.dataset.value = String(point.commuter_increment_pct);
    const hover = document.createElementNS(svgNs, 'title');
    hover.textContent = `lambda ${point.lam}: ${point.commuter_increment_pct}%`;
    dot.appendChild(hover);
    svg.appendChild(dot);
  }

  const label = (text: string, lam: number, cls: string) => {
    const node = document.createElementNS(svgNs, 'text');
    node.setAttribute('x', x(lam).toFixed(1));
    node.setAttribute('y', String(HEIGHT - PAD + 24));
    node.setAttribute('text-anchor', lam > 0.5 ? 'end' : 'start');
    node.setAttribute('class', cls);
    node.textContent = text;
    svg.appendChild(node);
  };
  label('habit', points[0].lam, 'endpoint-label endpoint-habit');
  label('selfish', points[points.length - 1].lam, 'endpoint-label endpoint-selfish');

  const yLabel = document.createElementNS(svgNs, 'text');
  yLabel.setAttribute('x', '6');
  yLabel.setAttribute('y', String(PAD - 10));
  yLabel.setAttribute('class', 'axis-label');
  yLabel.textContent = 'commuter increment %';
  svg.appendChild(yLabel);

  container.appendChild(svg);
};
