// Live round trip against a fixture-trained service. Gated on
// EDITOR_SERVICE_URL so unit runs stay hermetic; see the frontend README.

import { describe, expect, it } from "vitest";

import { ApiClient } from "../api.js";
import { poseOverlay } from "../render.js";
import { EditSession } from "../session.js";

const SERVICE_URL = process.env.EDITOR_SERVICE_URL;

// 1x1 white PNG; the service resizes any decodable reference
const TINY_PNG =
  "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mP8z8BQDwAEhQGAhKmMIQAAAABJRU5ErkJggg==";

describe.skipIf(!SERVICE_URL)("live service round trip", () => {
  it("submits an edit in under 2 s, renders the pose, appends one entry", async () => {
    const client = new ApiClient(SERVICE_URL!);
    const health = await client.health();
    expect(health.status).toBe("ok");

    const session = new EditSession(client);
    session.setReference(TINY_PNG);
    const started = performance.now();
    await session.submit("a woman in a red shirt and blue pants, facing the camera");
    const elapsed = performance.now() - started;
    expect(elapsed).toBeLessThan(2000);

    const state = session.state;
    expect(state.error).toBeNull();
    expect(state.history).toHaveLength(1);
    const entry = state.history[0];
    expect(entry.pose).not.toBeNull();
    expect(entry.pose!).toHaveLength(18);
    const overlay = poseOverlay(entry.pose!, [128, 64], 128, 256);
    expect(overlay.points.length).toBeGreaterThan(0);

    // a second submit appends exactly one more entry
    await session.submit("a woman in a green shirt and blue pants, facing left");
    expect(session.state.history).toHaveLength(2);
  });

  it("preserves the draft when the service is unreachable", async () => {
    const dead = new ApiClient("http://127.0.0.1:9");
    const session = new EditSession(dead);
    session.setReference(TINY_PNG);
    session.setDraft("a man in a yellow shirt");
    await session.submit();
    expect(session.state.error).not.toBeNull();
    expect(session.state.draftCaption).toBe("a man in a yellow shirt");
    expect(session.state.history).toHaveLength(0);
  });
});
