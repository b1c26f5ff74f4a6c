/**
 * Abstract zone grid: one cell per zone positioned by its centroid in
 * normalized coordinates, colored by travel minutes or percent increment.
 * No map tiles; the layout works offline with synthetic coordinates.
 */

import type { Comparison, ZoneMeta, ZoneTimesPayload } from './types.js';

export interface ZoneMapOptions {
  comparison: Comparison;
}

const cellValue = (
  payload: ZoneTimesPayload,
  zoneId: string,
  comparison: Comparison,
): number | null => {
  const entry = payload.destinations[zoneId];
  if (!entry) return null;
  return comparison === 'minutes' ? entry.minutes : entry.increment_pct;
};

/** Linear blue -> red ramp over [min, max]; degenerate ranges render mid-gray. */
export const colorFor = (value: number, min: number, max: number): string => {
  if (!(max > min)) return 'rgb(170,170,170)';
  const t = Math.min(1, Math.max(0, (value - min) / (max - min)));
  const r = Math.round(40 + t * (220 - 40));
  const g = Math.round(90 - t * 50);
  const b = Math.round(220 - t * (220 - 60));
  return `rgb(${r},${g},${b})`;
};

export const renderZoneMapError = (container: HTMLElement, message: string): void => {
  container.replaceChildren();
  const banner = document.createElement('div');
  banner.className = 'error-banner';
  banner.textContent = message;
  container.appendChild(banner);
};

export const renderZoneMap = (
  container: HTMLElement,
  payload: ZoneTimesPayload,
  zones: ZoneMeta[],
  options: ZoneMapOptions,
): void => {
  container.replaceChildren();
  const entries = Object.keys(payload.destinations);
  if (entries.length === 0) {
    const empty = document.createElement('div');
    empty.className = 'zone-map-empty';
    empty.textContent = `no demand from this zone (${payload.origin})`;
    container.appendChild(empty);
    return;
  }

  const values = entries
    .map((zoneId) => cellValue(payload, zoneId, options.comparison))
    .filter((v): v is number => v !== null && Number.isFinite(v));
  const min = Math.min(...values);
  const max = Math.max(...values);

  const lats = zones.map((z) => z.lat);
  const lons = zones.map((z) => z.lon);
  const latSpan = Math.max(...lats) - Math.min(...lats) || 1;
  const lonSpan = Math.max(...lons) - Math.min(...lons) || 1;
  const minLat = Math.min(...lats);
  const minLon = Math.min(...lons);

  const grid = document.createElement('div');
  grid.className = 'zone-map-grid';
  for (const zone of zones) {
    const cell = document.createElement('div');
    cell.className = 'zone-cell';
    cell.dataset.zone = zone.zone_id;
    // centroid layout: x from longitude, y from latitude (north up)
    cell.style.left = `${(((zone.lon - minLon) / lonSpan) * 88).toFixed(2)}%`;
    cell.style.top = `${((1 - (zone.lat - minLat) / latSpan) * 86).toFixed(2)}%`;
    const value = cellValue(payload, zone.zone_id, options.comparison);
    if (zone.zone_id === payload.origin) {
      cell.classList.add('origin');
      cell.textContent = zone.zone_id;
      cell.title = `origin ${zone.zone_id}`;
    } else if (value === null || !Number.isFinite(value)) {
      cell.classList.add('no-data');
      cell.textContent = zone.zone_id;
      cell.title = `${zone.zone_id}: no data`;
    } else {
      cell.dataset.value = String(value);
      cell.style.background = colorFor(value, min, max);
      const unit = options.comparison === 'minutes' ? 'min' : '%';
      cell.textContent = `${zone.zone_id} ${value.toFixed(1)}${unit}`;
      cell.title = `${zone.zone_id}: ${value} ${unit === '%' ? 'percent increment' : 'minutes'}`;
    }
    grid.appendChild(cell);
  }
  container.appendChild(grid);

  const legend = document.createElement('div');
  legend.className = 'zone-map-legend';
  const unit = options.comparison === 'minutes' ? 'min' : '% vs baseline';
  const lo = document.createElement('span');
  lo.className = 'legend-min';
  lo.textContent = `${min.toFixed(2)} ${unit}`;
  const bar = document.createElement('span');
  bar.className = 'legend-bar';
  const hi = document.createElement('span');
  hi.className = 'legend-max';
  hi.textContent = `${max.toFixed(2)} ${unit}`;
  legend.append(lo, bar, hi);
  container.appendChild(legend);
};
