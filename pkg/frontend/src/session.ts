/**
 * Session flow, independent of the DOM: fetch the next item, submit a
 * rating, repeat until the service reports completion. The service is
 * the single source of truth, so a page reload can resume by asking for
 * the next item again.
 */

import { NextResponse, RatingAck, RatingItem, SessionInfo } from './protocol.js';

export interface RatingSource {
  nextItem(sessionId: string): Promise<NextResponse>;
  submitRating(sessionId: string, sentenceId: string, value: number): Promise<RatingAck>;
}

export class SessionDriver {
  readonly sessionId: string;
  private source: RatingSource;
  private item: RatingItem | null = null;
  private sessionInfo: SessionInfo | null = null;

  constructor(source: RatingSource, sessionId: string) {
    this.source = source;
    this.sessionId = sessionId;
  }

  get current(): RatingItem | null {
    return this.item;
  }

  get info(): SessionInfo | null {
    return this.sessionInfo;
  }

  get complete(): boolean {
    return this.sessionInfo !== null && this.sessionInfo.state === 'complete';
  }

  /** Ask the service what to rate next; null means the session is done. */
  async advance(): Promise<RatingItem | null> {
    const response = await this.source.nextItem(this.sessionId);
    const { item, ...info } = response;
    this.sessionInfo = info;
    this.item = item;
    return item;
  }

  /** Rate the current item and drop it; advance() fetches the next one. */
  async submit(value: number): Promise<SessionInfo> {
    if (this.item === null) {
      throw new Error('no current item to rate');
    }
    const ack = await this.source.submitRating(this.sessionId, this.item.sentence_id, value);
    const { accepted, ...info } = ack;
    this.sessionInfo = info;
    this.item = null;
    return info;
  }
}

/**
 * Drive a session to completion, rating every served item with the
 * supplied policy. Returns the final session info.
 */
export async function runSession(
  source: RatingSource,
  sessionId: string,
  rate: (item: RatingItem, index: number) => number | Promise<number>,
): Promise<SessionInfo> {
  const driver = new SessionDriver(source, sessionId);
  let index = 0;
  for (;;) {
    const item = await driver.advance();
    if (item === null) {
      break;
    }
    await driver.submit(await rate(item, index));
    index += 1;
  }
  const info = driver.info;
  if (info === null || info.state !== 'complete') {
    throw new Error(`session ended in state ${info ? info.state : 'unknown'}`);
  }
  return info;
}
