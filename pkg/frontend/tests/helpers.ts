import { readFileSync } from 'node:fs';
import { resolve } from 'node:path';

export const loadFixture = <T>(name: string): T => {
  const path = resolve(process.cwd(), 'tests', 'fixtures', name);
  return JSON.parse(readFileSync(path, 'utf-8')) as T;
};

export const container = (): HTMLElement => {
  const node = document.createElement('div');
  document.body.appendChild(node);
  return node;
};
