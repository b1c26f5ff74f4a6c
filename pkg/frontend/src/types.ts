/**
 * Payload types mirroring the scenario service API (/api/v1/*).
 * The UI never computes metrics itself; every displayed number comes
 * straight out of one of these payloads.
 */

export interface ZoneMeta {
  zone_id: string;
  lat: number;
  lon: number;
}

export interface ZonesMetaPayload {
  version: number;
  zones: ZoneMeta[];
}

export interface DestinationEntry {
  minutes: number;
  baseline_minutes: number | null;
  increment_pct: number | null;
}

export interface ZoneTimesPayload {
  version: number;
  job_id: string;
  origin: string;
  destinations: Record<string, DestinationEntry>;
}

export interface SweepPoint {
  lam: number;
  commuter_increment_pct: number;
  collective_time_veh_min: number;
}

export interface SweepPayload {
  version: number;
  job_id: string;
  points: SweepPoint[];
}

export interface SavingsSummary {
  t_before_veh_min: number;
  t_after_veh_min: number;
  savings_pct: number;
  removed_vph: number;
  removed_share_pct: number;
  speed_before_kmh: number;
  speed_after_kmh: number;
  converged: boolean;
}

export interface ReductionRow {
  origin: string;
  dest: string;
  removed_vph: number;
  mc_p_min: number;
}

export interface SegmentRow {
  line_id: string;
  from_station: string;
  to_station: string;
  delta_persons: number;
  over_capacity: boolean;
}

export interface WhatIfParams {
  radius_km: number;
  top_k: number;
  fraction: number;
  mode: 'marginal' | 'uniform';
}

export interface WhatIfPayload {
  version: number;
  job_id: string;
  params: WhatIfParams;
  savings: SavingsSummary;
  converged: boolean;
  reductions: ReductionRow[];
  segments: SegmentRow[];
}

export interface JobView {
  version: number;
  job_id: string;
  state: 'queued' | 'running' | 'done' | 'failed';
  progress: number;
  scenario: string;
  lam: number | null;
  hour: number;
  error?: string;
  metrics?: Record<string, unknown>;
}

export interface JobListPayload {
  version: number;
  jobs: JobView[];
}

/** Which value the zone map colors by. */
export type Comparison = 'minutes' | 'increment';

/** Everything the console needs to render one view. */
export interface ViewState {
  jobId: string | null;
  originZone: string | null;
  lam: number;
  comparison: Comparison;
  strategy: WhatIfParams;
}

export const defaultViewState = (): ViewState => ({
  jobId: null,
  originZone: null,
  lam: 1.0,
  comparison: 'minutes',
  strategy: { radius_km: 2.0, top_k: 5, fraction: 0.6, mode: 'marginal' },
});

export const clampLambda = (value: number): number =>
  Number.isFinite(value) ? Math.min(1, Math.max(0, value)) : 0;
