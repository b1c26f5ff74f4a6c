/**
 * Typed client for the scenario service plus the stale-request gate.
 *
 * Each panel funnels its fetches through one LatestGate: starting a new
 * request aborts the in-flight one, and a response is surfaced only when it
 * still belongs to the newest request, so the screen always reflects the
 * latest acknowledged parameters.
 */

import type {
  JobListPayload,
  JobView,
  SweepPayload,
  WhatIfParams,
  WhatIfPayload,
  ZoneTimesPayload,
  ZonesMetaPayload,
} from './types.js';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`service error ${status}: ${detail}`);
  }
}

export class LatestGate {
  private seq = 0;
  private controller: AbortController | null = null;

  /** Run a request, aborting any in-flight one; stale results yield null. */
  async run<T>(task: (signal: AbortSignal) => Promise<T>): Promise<T | null> {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const ticket = ++this.seq;
    try {
      const result = await task(controller.signal);
      return ticket === this.seq ? result : null;
    } catch (err) {
      if (ticket !== this.seq || (err as { name?: string }).name === 'AbortError') {
        return null;
      }
      throw err;
    }
  }

  cancel(): void {
    this.controller?.abort();
    this.controller = null;
    this.seq += 1;
  }
}

export class ApiClient {
  constructor(
    private readonly base = '',
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async get<T>(path: string, signal?: AbortSignal): Promise<T> {
    const response = await this.fetchImpl(`${this.base}${path}`, { signal });
    if (!response.ok) {
      throw new ApiError(response.status, await safeDetail(response));
    }
    return (await response.json()) as T;
  }

  private async post<T>(path: string, body: unknown, signal?: AbortSignal): Promise<T> {
    const response = await this.fetchImpl(`${this.base}${path}`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
      signal,
    });
    if (!response.ok) {
      throw new ApiError(response.status, await safeDetail(response));
    }
    return (await response.json()) as T;
  }

  health(signal?: AbortSignal): Promise<{ version: number; status: string }> {
    return this.get('/api/v1/health', signal);
  }

  zonesMeta(signal?: AbortSignal): Promise<ZonesMetaPayload> {
    return this.get('/api/v1/zones', signal);
  }

  listJobs(signal?: AbortSignal): Promise<JobListPayload> {
    return this.get('/api/v1/jobs', signal);
  }

  submitJob(
    body: { scenario: string; lam?: number | null; lambda_sweep?: number[] },
    signal?: AbortSignal,
  ): Promise<JobView> {
    return this.post('/api/v1/jobs', body, signal);
  }

  jobStatus(jobId: string, signal?: AbortSignal): Promise<JobView> {
    return this.get(`/api/v1/jobs/${jobId}`, signal);
  }

  zoneTimes(jobId: string, zone: string, signal?: AbortSignal): Promise<ZoneTimesPayload> {
    return this.get(`/api/v1/jobs/${jobId}/zones/${zone}`, signal);
  }

  sweep(jobId: string, signal?: AbortSignal): Promise<SweepPayload> {
    return this.get(`/api/v1/jobs/${jobId}/sweep`, signal);
  }

  whatif(jobId: string, params: WhatIfParams, signal?: AbortSignal): Promise<WhatIfPayload> {
    return this.post(`/api/v1/jobs/${jobId}/whatif`, params, signal);
  }
}

const safeDetail = async (response: Response): Promise<string> => {
  try {
    const body = (await response.json()) as { detail?: unknown };
    return typeof body.detail === 'string' ? body.detail : JSON.stringify(body);
  } catch {
    return response.statusText || 'unknown error';
  }
};
