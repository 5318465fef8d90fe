// Trial flow: renders each phase of the study and submits responses.
//
// The service is the source of truth for sequencing; this controller
// renders whatever phase the server says is current, which makes a
// reload safe at any point.

import { Ack, ApiError, ExamplePayload, StudyApi, TrialPayload } from './api.js';
import {
  JUSTIFICATIONS,
  certificationProblem,
  ratingProblem,
  viewportLargeEnough,
} from './validation.js';
import { ViewerState, cssFor, initialViewer, toggleInvert, zoomBy, panBy } from './viewer.js';

type Child = Node | string;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Child[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    if (k === 'class') node.className = v;
    else node.setAttribute(k, v);
  }
  for (const c of children) {
    node.append(c instanceof Node ? c : document.createTextNode(c));
  }
  return node;
}

function labelName(label: 'present' | 'absent'): string {
  return label === 'present' ? 'Pneumothorax present' : 'Pneumothorax absent';
}

/** An image pane with zoom / pan / invert controls. */
export function imageViewer(src: string, caption: string, testId: string): HTMLElement {
  let state: ViewerState = initialViewer(src);
  const img = el('img', { src, class: 'viewer-img', draggable: 'false' });
  const frame = el('div', { class: 'viewer-frame' }, img);

  const apply = () => {
    const css = cssFor(state);
    img.style.transform = css.transform;
    img.style.filter = css.filter;
    img.dataset.inverted = String(state.inverted);
    img.dataset.zoom = String(state.zoom);
  };

  const zoomIn = el('button', { type: 'button', class: 'viewer-btn', 'data-action': 'zoom-in' }, 'Zoom +');
  const zoomOut = el('button', { type: 'button', class: 'viewer-btn', 'data-action': 'zoom-out' }, 'Zoom −');
  const invert = el('button', { type: 'button', class: 'viewer-btn', 'data-action': 'invert' }, 'Invert');
  zoomIn.addEventListener('click', () => { state = zoomBy(state, 2); apply(); });
  zoomOut.addEventListener('click', () => { state = zoomBy(state, 0.5); apply(); });
  invert.addEventListener('click', () => { state = toggleInvert(state); apply(); });

  let dragging: { x: number; y: number } | null = null;
  frame.addEventListener('mousedown', (e) => { dragging = { x: e.clientX, y: e.clientY }; });
  window.addEventListener('mouseup', () => { dragging = null; });
  frame.addEventListener('mousemove', (e) => {
    if (!dragging) return;
    state = panBy(state, e.clientX - dragging.x, e.clientY - dragging.y);
    dragging = { x: e.clientX, y: e.clientY };
    apply();
  });

  apply();
  return el('figure', { class: 'viewer', 'data-testid': testId },
    frame,
    el('figcaption', {}, caption),
    el('div', { class: 'viewer-controls' }, zoomIn, zoomOut, invert),
  );
}

interface SliderHandle {
  root: HTMLElement;
  submit: HTMLButtonElement;
  value: () => number | null;
}

/** Rating slider that stays unsubmittable until the participant moves it. */
export function ratingSlider(scale: { low_label: string; high_label: string },
                             submitLabel: string): SliderHandle {
  const input = el('input', {
    type: 'range', min: '0', max: '100', step: '1', value: '50',
    class: 'rating-input', 'data-testid': 'rating-input',
  });
  const submit = el('button',
    { type: 'button', class: 'submit-btn', 'data-testid': 'rating-submit', disabled: '' },
    submitLabel);
  const problem = el('p', { class: 'form-problem', 'data-testid': 'rating-problem' }, 'Move the slider to answer.');
  const readout = el('span', { class: 'rating-readout', 'data-testid': 'rating-readout' }, '–');

  let moved = false;
  const refresh = () => {
    const value = moved ? Number(input.value) : null;
    const why = ratingProblem(value);
    problem.textContent = why ?? '';
    submit.disabled = why !== null;
    readout.textContent = moved ? input.value : '–';
  };
  input.addEventListener('input', () => { moved = true; refresh(); });
  refresh();

  const root = el('div', { class: 'rating' },
    el('div', { class: 'rating-labels' },
      el('span', { class: 'rating-low' }, scale.low_label),
      readout,
      el('span', { class: 'rating-high' }, scale.high_label)),
    input, problem, submit);
  return { root, submit, value: () => (moved ? Number(input.value) : null) };
}

export class StudyController {
  private sessionId = '';

  constructor(private readonly root: HTMLElement,
              private readonly api: StudyApi,
              private readonly now: () => number = () => Date.now()) {}

  async start(viewport: { width: number; height: number }): Promise<void> {
    if (!viewportLargeEnough(viewport.width, viewport.height)) {
      this.root.replaceChildren(el('div', { class: 'screen', 'data-testid': 'viewport-blocked' },
        el('h1', {}, 'Screen too small'),
        el('p', {}, 'This study requires a screen of at least 1064 × 600 pixels. '
          + 'Please switch to a larger display and reload.')));
      return;
    }
    const session = await this.api.createSession();
    this.sessionId = session.session_id;
    await this.advance();
  }

  private async advance(): Promise<void> {
    const payload = await this.api.currentTrial(this.sessionId);
    if (payload.done) {
      this.root.replaceChildren(el('div', { class: 'screen', 'data-testid': 'study-done' },
        el('h1', {}, 'All done'),
        el('p', {}, 'Thank you for taking part. You can close this window.')));
      return;
    }
    if (payload.phase === 'diagnose') this.renderDiagnose(payload);
    else if (payload.phase === 'predict') this.renderPredict(payload);
    else this.renderRespond(payload);
  }

  private async submit(body: Record<string, unknown>, problemNode: HTMLElement): Promise<Ack | null> {
    try {
      return await this.api.submitResponse(this.sessionId, body as any);
    } catch (err) {
      problemNode.textContent = err instanceof ApiError
        ? err.message
        : 'Could not reach the study server; please try again.';
      return null;
    }
  }

  private renderDiagnose(trial: TrialPayload): void {
    const shownAt = this.now();
    const slider = ratingSlider(trial.rating_scale!, 'Submit diagnosis');
    slider.submit.addEventListener('click', async () => {
      const ack = await this.submit({
        trial_id: trial.trial_id, phase: 'diagnose', rating: slider.value(),
        timestamps: { shown_at: shownAt, submitted_at: this.now() },
      }, slider.root.querySelector('[data-testid=rating-problem]') as HTMLElement);
      if (ack) await this.advance();
    });
    this.root.replaceChildren(el('div', { class: 'screen', 'data-testid': 'screen-diagnose' },
      el('h2', {}, 'Your diagnosis'),
      el('p', {}, 'Examine the x-ray and rate how certain you are that a pneumothorax is present.'),
      imageViewer(trial.target!.display_url, `Target image (trial ${trial.trial_index! + 1})`, 'target-image'),
      slider.root));
  }

  private renderPredict(trial: TrialPayload): void {
    const shownAt = this.now();
    const examples = trial.examples ?? [];
    let step = 0; // 0..3 examples, 4 target+saliency, 5 reminder
    const stage = el('div', { class: 'stage' });

    const renderStep = () => {
      if (step < examples.length) {
        stage.replaceChildren(this.exampleScreen(examples[step], step, examples.length, () => {
          step += 1; renderStep();
        }, step > 0 ? () => { step -= 1; renderStep(); } : null));
      } else if (step === examples.length) {
        stage.replaceChildren(this.targetScreen(trial, () => { step += 1; renderStep(); },
          () => { step -= 1; renderStep(); }));
      } else {
        stage.replaceChildren(this.reminderScreen(trial, shownAt));
      }
    };
    renderStep();
    this.root.replaceChildren(el('div', { class: 'screen', 'data-testid': 'screen-predict' }, stage));
  }

  private exampleScreen(example: ExamplePayload, index: number, total: number,
                        next: () => void, back: (() => void) | null): HTMLElement {
    const nextBtn = el('button', { type: 'button', class: 'nav-btn', 'data-testid': 'example-next' },
      index + 1 === total ? 'Continue to the target' : 'Next example');
    nextBtn.addEventListener('click', next);
    const nav = el('div', { class: 'nav' });
    if (back) {
      const backBtn = el('button', { type: 'button', class: 'nav-btn', 'data-testid': 'example-back' }, 'Back');
      backBtn.addEventListener('click', back);
      nav.append(backBtn);
    }
    nav.append(nextBtn);
    return el('div', { class: 'example', 'data-testid': `example-${example.role}` },
      el('h2', {}, `Example ${index + 1} of ${total}`),
      el('p', { class: 'example-facts' },
        el('strong', {}, `Ground truth: ${labelName(example.ground_truth)}. `),
        `The robot classified this as "${labelName(example.ai_label)}" `
        + `with probability ${example.ai_prob.toFixed(3)}.`),
      el('div', { class: 'pair' },
        imageViewer(example.display_url, 'Example x-ray', `example-display-${index}`),
        imageViewer(example.saliency_url, 'Where the robot looked', `example-saliency-${index}`)),
      nav);
  }

  private targetScreen(trial: TrialPayload, next: () => void, back: () => void): HTMLElement {
    const nextBtn = el('button', { type: 'button', class: 'nav-btn', 'data-testid': 'target-next' },
      'Continue');
    nextBtn.addEventListener('click', next);
    const backBtn = el('button', { type: 'button', class: 'nav-btn', 'data-testid': 'target-back' }, 'Back');
    backBtn.addEventListener('click', back);
    return el('div', { class: 'target-view', 'data-testid': 'target-with-saliency' },
      el('h2', {}, 'The target image again'),
      el('div', { class: 'pair' },
        imageViewer(trial.target!.display_url, 'Target x-ray', 'target-display'),
        imageViewer(trial.target!.saliency_url!, 'Where the robot looked', 'target-saliency')),
      el('div', { class: 'nav' }, backBtn, nextBtn));
  }

  private reminderScreen(trial: TrialPayload, shownAt: number): HTMLElement {
    const slider = ratingSlider(trial.rating_scale!, 'Submit prediction');
    const expanded = el('div', { class: 'expanded-viewer' });
    const thumbs = el('div', { class: 'thumbs' });
    const tiles: Array<{ label: string; url: string }> = [
      { label: 'target', url: trial.target!.display_url },
      ...(trial.examples ?? []).map((e) => ({ label: e.role, url: e.display_url })),
    ];
    for (const tile of tiles) {
      const thumb = el('img', {
        src: tile.url, class: 'thumb', 'data-testid': `thumb-${tile.label}`,
      });
      thumb.addEventListener('click', () => {
        expanded.replaceChildren(imageViewer(tile.url, `Expanded: ${tile.label}`, 'expanded-image'));
      });
      thumbs.append(thumb);
    }
    slider.submit.addEventListener('click', async () => {
      const ack = await this.submit({
        trial_id: trial.trial_id, phase: 'predict', rating: slider.value(),
        timestamps: { shown_at: shownAt, submitted_at: this.now() },
      }, slider.root.querySelector('[data-testid=rating-problem]') as HTMLElement);
      if (ack) this.renderFeedback(ack);
    });
    return el('div', { class: 'reminder', 'data-testid': 'reminder-screen' },
      el('h2', {}, 'Predict the robot'),
      el('p', { 'data-testid': 'diagnosis-echo' },
        `You diagnosed this image at ${trial.diagnosis} out of 100.`),
      el('p', {}, 'Click any miniature to expand, zoom, or invert it.'),
      thumbs, expanded,
      el('p', {}, 'How do you think the robot classified the target?'),
      slider.root);
  }

  private renderFeedback(ack: Ack): void {
    const btn = el('button', { type: 'button', class: 'nav-btn', 'data-testid': 'feedback-next' },
      'Next trial');
    btn.addEventListener('click', () => void this.advance());
    const fb = ack.feedback!;
    this.root.replaceChildren(el('div', { class: 'screen', 'data-testid': 'screen-feedback' },
      el('h2', {}, fb.correct ? 'Correct!' : 'Not quite.'),
      el('p', {}, `The robot classified the target as "${labelName(fb.ai_label as any)}" `
        + `with probability ${fb.ai_prob.toFixed(3)}.`),
      btn));
  }

  private renderRespond(trial: TrialPayload): void {
    const shownAt = this.now();
    let certify: boolean | null = null;
    let agree: boolean | null = null;
    const chosen = new Set<string>();

    const problem = el('p', { class: 'form-problem', 'data-testid': 'respond-problem' }, '');
    const submit = el('button',
      { type: 'button', class: 'submit-btn', 'data-testid': 'respond-submit', disabled: '' },
      'Submit decision');
    const freeText = el('textarea', {
      class: 'free-text', 'data-testid': 'free-text',
      placeholder: 'Elaborate here (required for some options)',
    });

    const refresh = () => {
      const why = certificationProblem(certify, agree, chosen, freeText.value);
      problem.textContent = why ?? '';
      submit.disabled = why !== null;
    };

    const binary = (name: string, setter: (v: boolean) => void) => {
      const wrap = el('div', { class: 'binary', 'data-testid': `choice-${name}` });
      for (const value of [true, false]) {
        const btn = el('button', {
          type: 'button', class: 'choice-btn',
          'data-testid': `${name}-${value ? 'yes' : 'no'}`,
        }, value ? 'Yes' : 'No');
        btn.addEventListener('click', () => {
          setter(value);
          wrap.querySelectorAll('.choice-btn').forEach((b) => b.classList.remove('chosen'));
          btn.classList.add('chosen');
          refresh();
        });
        wrap.append(btn);
      }
      return wrap;
    };

    const checks = el('div', { class: 'justifications' });
    for (const option of JUSTIFICATIONS) {
      const box = el('input', { type: 'checkbox', id: `j-${option.key}`, 'data-testid': `just-${option.key}` });
      box.addEventListener('change', () => {
        if ((box as HTMLInputElement).checked) chosen.add(option.key);
        else chosen.delete(option.key);
        refresh();
      });
      checks.append(el('div', { class: 'justification' },
        box, el('label', { for: `j-${option.key}` }, option.label)));
    }
    freeText.addEventListener('input', refresh);

    submit.addEventListener('click', async () => {
      const ack = await this.submit({
        trial_id: trial.trial_id, phase: 'respond',
        certify, agree, justifications: [...chosen], free_text: freeText.value,
        timestamps: { shown_at: shownAt, submitted_at: this.now() },
      }, problem);
      if (ack) await this.advance();
    });

    const imagery = el('div', { class: 'pair' },
      imageViewer(trial.target!.display_url, 'Target x-ray', 'target-display'),
      imageViewer(trial.target!.saliency_url!, 'Where the robot looked', 'target-saliency'));
    const examplesBlock = el('div', { class: 'cert-examples', 'data-testid': 'cert-examples' });
    for (const [i, ex] of (trial.examples ?? []).entries()) {
      examplesBlock.append(el('div', { class: 'cert-example', 'data-testid': `cert-example-${ex.role}` },
        el('p', {},
          `${ex.role.toUpperCase()} example — ground truth ${labelName(ex.ground_truth)}; `
          + `robot said "${labelName(ex.ai_label)}" (${ex.ai_prob.toFixed(3)}).`),
        el('div', { class: 'pair' },
          imageViewer(ex.display_url, 'Example x-ray', `cert-display-${i}`),
          imageViewer(ex.saliency_url, 'Where the robot looked', `cert-saliency-${i}`))));
    }

    this.root.replaceChildren(el('div', { class: 'screen', 'data-testid': 'screen-respond' },
      el('h2', {}, 'Certification decision'),
      el('p', { 'data-testid': 'ai-judgement' },
        `The robot classified this target as "${labelName(trial.ai!.label)}" `
        + `with probability ${trial.ai!.prob.toFixed(3)}.`),
      imagery,
      examplesBlock,
      el('h3', {}, 'Would you certify the robot for images similar to this one?'),
      binary('certify', (v) => { certify = v; }),
      el('h3', {}, 'Do you agree with the robot’s diagnosis?'),
      binary('agree', (v) => { agree = v; }),
      el('h3', {}, 'Why? Select all that apply.'),
      checks, freeText, problem, submit));
  }
}
