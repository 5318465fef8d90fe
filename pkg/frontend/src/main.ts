// Entry point: gate on viewport size, then run the study against the
// same origin that served this page.

import { StudyApi } from './api.js';
import { StudyController } from './app.js';

export function boot(root: HTMLElement = document.getElementById('app')!): void {
  const controller = new StudyController(root, new StudyApi(''));
  void controller.start({ width: window.innerWidth, height: window.innerHeight });
}

if (typeof window !== 'undefined' && document.getElementById('app')) {
  boot();
}
