/**
 * View-state controller wiring the panels to the service client.
 *
 * Responsibilities: keep one ViewState, debounce slider edits into service
 * calls, route every fetch through a per-panel LatestGate so stale
 * responses never reach the screen, and re-color the zone map from the
 * cached payload when only the comparison toggle changes.
 */

import { ApiClient, LatestGate } from './api.js';
import { debounce, type Debounced } from './debounce.js';
import { renderStrategyPanel, renderStrategyError } from './strategyPanel.js';
import { renderSweepChart } from './sweepChart.js';
import { renderZoneMap, renderZoneMapError } from './zoneMap.js';
import {
  clampLambda,
  defaultViewState,
  type Comparison,
  type ViewState,
  type WhatIfParams,
  type ZoneMeta,
  type ZoneTimesPayload,
} from './types.js';

export interface Panels {
  zoneMap: HTMLElement;
  sweep: HTMLElement;
  strategy: HTMLElement;
}

export const DEBOUNCE_MS = 300;

export class WhatIfConsole {
  readonly state: ViewState = defaultViewState();
  private zones: ZoneMeta[] = [];
  private zonePayload: ZoneTimesPayload | null = null;
  private readonly zoneGate = new LatestGate();
  private readonly sweepGate = new LatestGate();
  private readonly strategyGate = new LatestGate();
  private readonly jobGate = new LatestGate();
  private readonly strategyDebounced: Debounced<[]>;
  private readonly lambdaDebounced: Debounced<[]>;

  constructor(
    private readonly api: ApiClient,
    private readonly panels: Panels,
    waitMs: number = DEBOUNCE_MS,
    private readonly pollMs: number = 250,
  ) {
    this.strategyDebounced = debounce(() => void this.refreshStrategy(), waitMs);
    this.lambdaDebounced = debounce(() => void this.submitLambdaJob(), waitMs);
  }

  async init(): Promise<void> {
    this.zones = (await this.api.zonesMeta()).zones;
  }

  async selectJob(jobId: string): Promise<void> {
    this.state.jobId = jobId;
    this.zonePayload = null;
    await Promise.all([this.refreshZoneMap(), this.refreshSweep()]);
    this.strategyDebounced.flush();
  }

  async selectOrigin(zone: string): Promise<void> {
    this.state.originZone = zone;
    await this.refreshZoneMap();
  }

  /** Re-colors from the cached payload; never refetches. */
  setComparison(comparison: Comparison): void {
    this.state.comparison = comparison;
    if (this.zonePayload !== null) {
      renderZoneMap(this.panels.zoneMap, this.zonePayload, this.zones, { comparison });
    }
  }

  setLambda(lam: number): void {
    this.state.lam = clampLambda(lam);
    this.lambdaDebounced();
  }

  setStrategyParam<K extends keyof WhatIfParams>(key: K, value: WhatIfParams[K]): void {
    this.state.strategy = { ...this.state.strategy, [key]: value };
    this.strategyDebounced();
  }

  async refreshZoneMap(): Promise<void> {
    const { jobId, originZone } = this.state;
    if (jobId === null || originZone === null) return;
    try {
      const payload = await this.zoneGate.run((signal) =>
        this.api.zoneTimes(jobId, originZone, signal),
      );
      if (payload === null) return; // superseded by a newer request
      this.zonePayload = payload;
      renderZoneMap(this.panels.zoneMap, payload, this.zones, {
        comparison: this.state.comparison,
      });
    } catch (err) {
      this.zonePayload = null;
      renderZoneMapError(this.panels.zoneMap, `zone times unavailable: ${String(err)}`);
    }
  }

  async refreshSweep(): Promise<void> {
    const { jobId } = this.state;
    if (jobId === null) return;
    const payload = await this.sweepGate.run((signal) => this.api.sweep(jobId, signal));
    if (payload !== null) {
      renderSweepChart(this.panels.sweep, payload);
    }
  }

  async refreshStrategy(): Promise<void> {
    const { jobId, strategy } = this.state;
    if (jobId === null) return;
    try {
      const pair = await this.strategyGate.run(async (signal) => {
        const marginal = await this.api.whatif(jobId, { ...strategy, mode: 'marginal' }, signal);
        const uniform = await this.api.whatif(jobId, { ...strategy, mode: 'uniform' }, signal);
        return { marginal, uniform };
      });
      if (pair === null) return;
      renderStrategyPanel(this.panels.strategy, pair.marginal, pair.uniform);
    } catch (err) {
      renderStrategyError(this.panels.strategy, `strategy evaluation failed: ${String(err)}`);
    }
  }

  private async submitLambdaJob(): Promise<void> {
    const done = await this.jobGate.run(async (signal) => {
      const job = await this.api.submitJob({ scenario: 'mixed', lam: this.state.lam }, signal);
      let view = job;
      while (view.state === 'queued' || view.state === 'running') {
        await sleep(this.pollMs, signal);
        view = await this.api.jobStatus(job.job_id, signal);
      }
      return view;
    });
    if (done === null) return;
    if (done.state === 'done') {
      await this.selectJob(done.job_id);
    } else {
      renderZoneMapError(
        this.panels.zoneMap,
        `job ${done.job_id} failed: ${done.error ?? 'unknown error'}`,
      );
    }
  }
}

const sleep = (ms: number, signal: AbortSignal): Promise<void> =>
  new Promise((resolve, reject) => {
    const timer = setTimeout(resolve, ms);
    signal.addEventListener(
      'abort',
      () => {
        clearTimeout(timer);
        const err = new Error('aborted');
        err.name = 'AbortError';
        reject(err);
      },
      { once: true },
    );
  });
