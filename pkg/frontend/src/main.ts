/**
 * Browser bootstrap: builds the console layout, binds the controls, and
 * points the controller at the service that served this bundle.
 */

import { ApiClient } from './api.js';
import { WhatIfConsole } from './controller.js';
import type { Comparison } from './types.js';

const $ = <T extends HTMLElement = HTMLElement>(selector: string): T => {
  const node = document.querySelector<T>(selector);
  if (!node) throw new Error(`missing element ${selector}`);
  return node;
};

const boot = async (): Promise<void> => {
  const api = new ApiClient('');
  const console_ = new WhatIfConsole(api, {
    zoneMap: $('#zone-map'),
    sweep: $('#sweep-chart'),
    strategy: $('#strategy-panel'),
  });
  await console_.init();

  const jobSelect = $<HTMLSelectElement>('#job-select');
  const originSelect = $<HTMLSelectElement>('#origin-select');
  const zonesMeta = await api.zonesMeta();
  for (const zone of zonesMeta.zones) {
    const option = document.createElement('option');
    option.value = zone.zone_id;
    option.textContent = zone.zone_id;
    originSelect.appendChild(option);
  }

  const refreshJobList = async () => {
    const { jobs } = await api.listJobs();
    jobSelect.replaceChildren();
    for (const job of jobs) {
      const option = document.createElement('option');
      option.value = job.job_id;
      option.textContent = `${job.job_id} ${job.scenario}${
        job.lam !== null ? ` λ=${job.lam}` : ''
      } [${job.state}]`;
      jobSelect.appendChild(option);
    }
  };
  await refreshJobList();

  jobSelect.addEventListener('change', () => {
    if (jobSelect.value) void console_.selectJob(jobSelect.value);
  });
  originSelect.addEventListener('change', () => {
    if (originSelect.value) void console_.selectOrigin(originSelect.value);
  });

  for (const input of document.querySelectorAll<HTMLInputElement>('[name=comparison]')) {
    input.addEventListener('change', () => {
      console_.setComparison(input.value as Comparison);
    });
  }

  const lambdaSlider = $<HTMLInputElement>('#lambda-slider');
  const lambdaValue = $('#lambda-value');
  lambdaSlider.addEventListener('input', () => {
    const lam = Number(lambdaSlider.value) / 100;
    lambdaValue.textContent = lam.toFixed(2);
    console_.setLambda(lam);
  });

  const bind = (selector: string, key: 'radius_km' | 'top_k' | 'fraction', scale = 1) => {
    const input = $<HTMLInputElement>(selector);
    input.addEventListener('input', () => {
      console_.setStrategyParam(key, Number(input.value) * scale);
    });
  };
  bind('#radius-input', 'radius_km');
  bind('#topk-input', 'top_k');
  bind('#fraction-slider', 'fraction', 0.01);

  $('#refresh-jobs').addEventListener('click', () => void refreshJobList());
};

void boot();
