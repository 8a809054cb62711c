/** Renderer regression: draw a fixed home-pose scene into a recording 2-D
 * context and pin the resulting draw-command stream. Pixel rasterization
 * varies across platforms, but the command stream (with coordinates
 * rounded below a thousandth of a pixel) is deterministic, so it serves
 * as the golden image for the canvas renderer. */

import { describe, expect, it } from "vitest";

import { parseChain } from "../src/chain.js";
import { SceneView } from "../src/interp.js";
import { SideState, StateMessage } from "../src/protocol.js";
import { drawScene, RenderInputs } from "../src/render.js";
import { createScene } from "../src/scene.js";

const TWO_JOINT = `
name probe
home 0 0

[joint 1]
axis 0 0 1
origin 0 0 0.5 0 0 0
limits -3.14 3.14 2.0

[link 1]
mass 1.0
com 0 0 0.1

[joint 2]
axis 0 1 0
origin 0.2 0 0 0 0 0
limits -2.0 2.0 2.0

[link 2]
mass 0.5
com 0.1 0 0

[tool]
origin 0 0 0.1 0 0 0
`;

function side(overrides: Partial<SideState> = {}): SideState {
  return {
    q: [0, 0],
    ee: [0.2, 0, 0.6, 1, 0, 0, 0],
    gripper: 0.25,
    calibrated: true,
    rejects: 0,
    watchdog: { state: "ok", trips: 0 },
    haptic: { tau: 0.1, vib: 0.3 },
    ...overrides,
  };
}

function state(): StateMessage {
  return {
    v: 1,
    kind: "state",
    seq: 7,
    tick: 28,
    t: 0.112,
    ref: 1,
    drops: 2,
    left: side(),
    right: side(),
  };
}

type Command = [string, ...string[]];

/** CanvasRenderingContext2D stand-in that records every method call and
 * property assignment. Numbers are rounded to 3 decimals so trig ulp
 * differences between platforms cannot perturb the stream. */
function recordingContext(): { ctx: CanvasRenderingContext2D; log: Command[] } {
  const log: Command[] = [];
  const fmt = (v: unknown): string =>
    typeof v === "number" ? (Object.is(v, -0) ? 0 : v).toFixed(3) : JSON.stringify(v);
  const target: Record<string | symbol, unknown> = {};
  const ctx = new Proxy(target, {
    get(_t, prop) {
      return (...args: unknown[]) => {
        log.push([`call ${String(prop)}`, ...args.map(fmt)]);
      };
    },
    set(_t, prop, value) {
      log.push([`set ${String(prop)}`, fmt(value)]);
      return true;
    },
  }) as unknown as CanvasRenderingContext2D;
  return { ctx, log };
}

function homeInputs(): RenderInputs {
  const chain = parseChain(TWO_JOINT, "probe.chain");
  const st = state();
  const view: SceneView = {
    left: { q: [...st.left.q], eePos: [0.2, 0, 0.6], eeQuat: [1, 0, 0, 0], gripper: 0.25 },
    right: { q: [...st.right.q], eePos: [0.2, 0, 0.6], eeQuat: [1, 0, 0, 0], gripper: 0.25 },
    state: st,
  };
  const scene = createScene();
  scene.connection = "live";
  scene.lastState = st;
  scene.vib = { left: 0.3, right: 0.3 };
  scene.refIndex = 1;
  scene.drops = 2;
  return {
    view,
    scene,
    chains: { left: chain, right: chain },
    ghost: { left: [...chain.home], right: [...chain.home] },
    targets: { left: [0.2, 0, 0.6] },
    activeSide: "left",
    clutched: { left: false, right: false },
    frameMode: "world",
  };
}

function render(inputs: RenderInputs): Command[] {
  const { ctx, log } = recordingContext();
  drawScene(ctx, 800, 600, inputs);
  return log;
}

// djb2 over the serialized command stream.
function hash(log: Command[]): string {
  let h = 5381;
  const text = JSON.stringify(log);
  for (let i = 0; i < text.length; i++) {
    h = ((h * 33) ^ text.charCodeAt(i)) >>> 0;
  }
  return h.toString(16);
}

const HOME_SCENE_HASH = "32768d8f";

describe("scene rendering", () => {
  it("renders the home-pose scene identically every time", () => {
    const first = render(homeInputs());
    const second = render(homeInputs());
    expect(JSON.stringify(second)).toBe(JSON.stringify(first));
  });

  it("matches the pinned home-pose draw stream", () => {
    const log = render(homeInputs());
    // Structure first, so a mismatch points somewhere useful.
    const calls = log.map((c) => c[0]);
    expect(calls.filter((c) => c === "call beginPath").length).toBeGreaterThanOrEqual(6); // ground + 2 ghosts + 2 arms + target
    expect(calls.filter((c) => c === "call stroke").length).toBeGreaterThanOrEqual(6);
    expect(calls.filter((c) => c === "call fillRect").length).toBeGreaterThanOrEqual(3); // backdrop + 2 meters
    const texts = log.filter((c) => c[0] === "call fillText").map((c) => c[1]);
    expect(texts.some((t) => t.includes("L vib 0.30"))).toBe(true);
    expect(texts.some((t) => t.includes("live") && t.includes("tick 28") && t.includes("ref 1"))).toBe(true);
    expect(texts.some((t) => t.includes("WATCHDOG"))).toBe(false); // no banner in a clean scene
    expect(
      hash(log),
      "draw stream changed; if the renderer change is intentional, update HOME_SCENE_HASH",
    ).toBe(HOME_SCENE_HASH);
  });

  it("adds the banner and filter chip layers when flagged", () => {
    const inputs = homeInputs();
    inputs.scene.banner.left = true;
    inputs.scene.filtered.right = true;
    inputs.scene.lastState!.right.rejects = 4;
    const texts = render(inputs)
      .filter((c) => c[0] === "call fillText")
      .map((c) => c[1]);
    expect(texts.some((t) => t.includes("LEFT WATCHDOG"))).toBe(true);
    expect(texts.some((t) => t.includes("RIGHT WATCHDOG"))).toBe(false);
    expect(texts.some((t) => t.includes("input filtered (4)"))).toBe(true);
  });

  it("overlays the reconnect layer when the connection is lost", () => {
    const inputs = homeInputs();
    inputs.scene.connection = "lost";
    const texts = render(inputs)
      .filter((c) => c[0] === "call fillText")
      .map((c) => c[1]);
    expect(texts.some((t) => t.includes("connection lost"))).toBe(true);
  });
});
