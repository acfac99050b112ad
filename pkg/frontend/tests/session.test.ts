import { describe, expect, it } from 'vitest';

import { AnnotationClient, NextResponse, RatingAck, RatingItem } from '../src/protocol.js';
import { RatingSource, runSession, SessionDriver } from '../src/session.js';

const INSTRUCTION = 'Bewerten Sie, wie natürlich dieser Satz klingt.';

function makeItems(warmups: number, tests: number): RatingItem[] {
  const items: RatingItem[] = [];
  for (let i = 0; i < warmups; i++) {
    items.push({
      sentence_id: `filler:acc:w${i}`,
      text: `Aufwärmsatz ${i}.`,
      is_warmup: true,
      instruction: INSTRUCTION,
      scale: { min: 0, max: 99 },
    });
  }
  for (let i = 0; i < tests; i++) {
    items.push({
      sentence_id: `tpl${i % 3}:NNA:12${i % 10}`,
      text: `Testsatz ${i}.`,
      is_warmup: false,
      instruction: INSTRUCTION,
      scale: { min: 0, max: 99 },
    });
  }
  return items;
}

/** Minimal in-memory stand-in for the service, used by driver tests. */
class FakeSource implements RatingSource {
  items: RatingItem[];
  ratings = new Map<string, number>();

  constructor(items: RatingItem[]) {
    this.items = items;
  }

  private info(): Omit<NextResponse, 'item'> {
    const cursor = this.ratings.size;
    const current = this.items[cursor];
    return {
      session_id: 'fake',
      annotator_id: 'a1',
      state: cursor >= this.items.length ? 'complete' : current!.is_warmup ? 'warmup' : 'active',
      rated: cursor,
      total: this.items.length,
    };
  }

  async nextItem(): Promise<NextResponse> {
    return { ...this.info(), item: this.items[this.ratings.size] ?? null };
  }

  async submitRating(_sid: string, sentenceId: string, value: number): Promise<RatingAck> {
    const current = this.items[this.ratings.size];
    if (!current || current.sentence_id !== sentenceId) {
      throw new Error(`unexpected rating for ${sentenceId}`);
    }
    this.ratings.set(sentenceId, value);
    return { ...this.info(), accepted: true };
  }
}

describe('SessionDriver', () => {
  it('walks items in served order and reports completion', async () => {
    const source = new FakeSource(makeItems(2, 4));
    const driver = new SessionDriver(source, 'fake');
    const seen: string[] = [];
    while ((await driver.advance()) !== null) {
      seen.push(driver.current!.sentence_id);
      await driver.submit(50);
    }
    expect(seen).toEqual(source.items.map((i) => i.sentence_id));
    expect(driver.complete).toBe(true);
    expect(driver.info?.rated).toBe(6);
  });

  it('refuses to submit when nothing is pending', async () => {
    const driver = new SessionDriver(new FakeSource(makeItems(0, 1)), 'fake');
    await expect(driver.submit(10)).rejects.toThrow('no current item');
  });

  it('resumes mid-session from the service state alone', async () => {
    const source = new FakeSource(makeItems(1, 3));
    const first = new SessionDriver(source, 'fake');
    await first.advance();
    await first.submit(40);
    await first.advance();
    await first.submit(41);
    // Simulated reload: a brand-new driver continues at the third item.
    const second = new SessionDriver(source, 'fake');
    const item = await second.advance();
    expect(item?.sentence_id).toBe(source.items[2]!.sentence_id);
    expect(second.info?.rated).toBe(2);
  });
});

/**
 * Wire-level simulator speaking the service's JSON protocol, with an
 * optional fault: every nth rating is stored but its response is lost,
 * which forces the client down the retry/duplicate path.
 */
class WireSim {
  items: RatingItem[];
  ratings = new Map<string, number>();
  ratingPosts = 0;
  private dropAckEvery: number;

  constructor(items: RatingItem[], dropAckEvery = 0) {
    this.items = items;
    this.dropAckEvery = dropAckEvery;
  }

  private session(): Record<string, unknown> {
    const cursor = this.ratings.size;
    const current = this.items[cursor];
    return {
      session_id: 'wire1',
      annotator_id: 'sim',
      state: cursor >= this.items.length ? 'complete' : current!.is_warmup ? 'warmup' : 'active',
      rated: cursor,
      total: this.items.length,
    };
  }

  private respond(status: number, body: unknown): Response {
    return new Response(JSON.stringify(body), { status });
  }

  async handle(url: string, init?: RequestInit): Promise<Response> {
    const path = new URL(url).pathname;
    if (path === '/v1/sessions' && init?.method === 'POST') {
      return this.respond(201, this.session());
    }
    if (path === '/v1/sessions/wire1/next') {
      return this.respond(200, { ...this.session(), item: this.items[this.ratings.size] ?? null });
    }
    if (path === '/v1/sessions/wire1/ratings' && init?.method === 'POST') {
      const { sentence_id, value } = JSON.parse(String(init.body));
      this.ratingPosts += 1;
      if (!Number.isInteger(value) || value < 0 || value > 99) {
        return this.respond(400, { error: `rating ${value} out of range` });
      }
      if (this.ratings.has(sentence_id)) {
        return this.respond(409, { error: 'sentence already rated in this session' });
      }
      const current = this.items[this.ratings.size];
      if (!current || current.sentence_id !== sentence_id) {
        return this.respond(400, { error: 'not the current item' });
      }
      this.ratings.set(sentence_id, value);
      if (this.dropAckEvery && this.ratings.size % this.dropAckEvery === 0) {
        throw new TypeError('socket closed before response');
      }
      return this.respond(200, { accepted: true, ...this.session() });
    }
    if (path === '/v1/sessions/wire1') {
      return this.respond(200, this.session());
    }
    return this.respond(404, { error: `no such resource: ${path}` });
  }
}

describe('full simulated session over the wire protocol', () => {
  it('rates every item exactly once despite lost responses', async () => {
    const items = makeItems(2, 10);
    const sim = new WireSim(items, 3);
    const client = new AnnotationClient('http://sim', {
      fetchFn: (url, init) => sim.handle(url, init),
      sleep: async () => {},
    });
    const info = await client.createSession('sim');
    const served: string[] = [];
    const final = await runSession(client, info.session_id, (item, index) => {
      served.push(item.sentence_id);
      return (index * 7) % 100;
    });

    expect(final.state).toBe('complete');
    expect(final.rated).toBe(items.length);
    expect(served).toEqual(items.map((i) => i.sentence_id));
    expect(sim.ratings.size).toBe(items.length);
    for (const [index, item] of items.entries()) {
      expect(sim.ratings.get(item.sentence_id)).toBe((index * 7) % 100);
    }
    // Lost responses produced extra POSTs, never extra stored ratings.
    expect(sim.ratingPosts).toBeGreaterThan(items.length);
  });
});
