/**
 * DOM layer: one sentence per screen, a verbal-anchor slider, and a
 * progress count. Test sentences are shown bare; the UI intentionally
 * has no access to (and never renders) sentence identifiers or any
 * other metadata beyond the warm-up flag.
 */

import { RatingItem, RatingService, ServiceError } from './protocol.js';
import { SessionDriver } from './session.js';
import { canSubmit, initialSliderState, moveSlider, RATING_MAX, RATING_MIN, SliderState } from './slider.js';

const SESSION_KEY = 'kasusprobe-session-id';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export class App {
  private root: HTMLElement;
  private client: RatingService;
  private storage: Storage;
  private driver: SessionDriver | null = null;
  private slider: SliderState = initialSliderState();

  constructor(root: HTMLElement, client: RatingService, storage?: Storage) {
    this.root = root;
    this.client = client;
    this.storage = storage ?? window.sessionStorage;
  }

  /** Resume a stored session if one exists, else show the start screen. */
  async start(): Promise<void> {
    const stored = this.storage.getItem(SESSION_KEY);
    if (stored) {
      try {
        await this.resume(stored);
        return;
      } catch {
        this.storage.removeItem(SESSION_KEY);
      }
    }
    this.renderStart();
  }

  private async resume(sessionId: string): Promise<void> {
    this.driver = new SessionDriver(this.client, sessionId);
    await this.driver.advance();
    this.renderCurrent();
  }

  private async begin(annotatorId: string): Promise<void> {
    const info = await this.client.createSession(annotatorId);
    this.storage.setItem(SESSION_KEY, info.session_id);
    await this.resume(info.session_id);
  }

  private renderStart(message?: string): void {
    this.root.replaceChildren();
    const box = el('div', 'start-screen');
    box.append(el('h1', undefined, 'Satzbewertung'));
    box.append(
      el(
        'p',
        'intro',
        'Sie bekommen einzelne Sätze gezeigt und bewerten jeweils, wie natürlich der Satz klingt.',
      ),
    );
    const input = el('input', 'annotator-id');
    input.type = 'text';
    input.placeholder = 'Ihr Teilnahme-Code';
    const button = el('button', 'begin', 'Los geht’s');
    button.addEventListener('click', () => {
      const annotatorId = input.value.trim();
      if (!annotatorId) {
        this.renderStart('Bitte geben Sie Ihren Teilnahme-Code ein.');
        return;
      }
      this.begin(annotatorId).catch((failure) => this.renderError(failure));
    });
    box.append(input, button);
    if (message) {
      box.append(el('p', 'notice', message));
    }
    this.root.append(box);
  }

  private renderCurrent(): void {
    const driver = this.driver;
    if (driver === null) {
      this.renderStart();
      return;
    }
    if (driver.current === null) {
      this.renderDone();
      return;
    }
    this.renderItem(driver.current);
  }

  private renderItem(item: RatingItem): void {
    this.slider = initialSliderState();
    this.root.replaceChildren();
    const screen = el('div', 'rating-screen');

    if (item.is_warmup) {
      screen.append(el('div', 'warmup-badge', 'Beispiel zum Aufwärmen – übt den Umgang mit der Skala'));
    }
    screen.append(el('p', 'instruction', item.instruction));
    screen.append(el('blockquote', 'sentence', item.text));

    const controls = el('div', 'controls');
    const range = el('input', 'rating-slider');
    range.type = 'range';
    range.min = String(item.scale.min ?? RATING_MIN);
    range.max = String(item.scale.max ?? RATING_MAX);
    range.step = '1';
    range.value = String(this.slider.value);

    const anchors = el('div', 'anchors');
    anchors.append(el('span', 'anchor-left', 'nicht natürlich'));
    anchors.append(el('span', 'anchor-right', 'sehr natürlich'));

    const submit = el('button', 'submit', 'Weiter');
    submit.disabled = true;

    range.addEventListener('input', () => {
      this.slider = moveSlider(this.slider, Number(range.value));
      submit.disabled = !canSubmit(this.slider);
    });
    submit.addEventListener('click', () => {
      if (!canSubmit(this.slider)) {
        return;
      }
      submit.disabled = true;
      this.submitCurrent().catch((failure) => this.renderError(failure));
    });

    controls.append(anchors, range, submit);
    screen.append(controls);
    screen.append(this.renderProgress());
    this.root.append(screen);
  }

  private async submitCurrent(): Promise<void> {
    const driver = this.driver;
    if (driver === null || driver.current === null) {
      return;
    }
    await driver.submit(this.slider.value);
    await driver.advance();
    this.renderCurrent();
  }

  private renderProgress(): HTMLElement {
    const info = this.driver ? this.driver.info : null;
    const text = info ? `${info.rated} / ${info.total}` : '';
    const progress = el('div', 'progress', text);
    return progress;
  }

  private renderDone(): void {
    this.storage.removeItem(SESSION_KEY);
    this.root.replaceChildren();
    const screen = el('div', 'done-screen');
    screen.append(el('h1', undefined, 'Geschafft!'));
    screen.append(el('p', undefined, 'Alle Sätze sind bewertet. Vielen Dank für Ihre Teilnahme.'));
    this.root.append(screen);
  }

  private renderError(failure: unknown): void {
    this.root.replaceChildren();
    const screen = el('div', 'error-screen');
    screen.append(el('h1', undefined, 'Das hat leider nicht geklappt'));
    const detail =
      failure instanceof ServiceError && failure.status > 0
        ? failure.message
        : 'Die Verbindung zum Server ist fehlgeschlagen. Bitte laden Sie die Seite neu.';
    screen.append(el('p', 'error-detail', detail));
    this.root.append(screen);
  }
}

export async function mountApp(
  root: HTMLElement,
  client: RatingService,
  storage?: Storage,
): Promise<App> {
  const app = new App(root, client, storage);
  await app.start();
  return app;
}
