/** Browser bootstrap: wires the gateway client, input mapper, and renderer.
 *
 * Served by the gateway itself (`serve --static frontend`) at /ui, or from
 * any static host with `?server=host:port` pointing at the gateway.
 *
 * Controls:
 *   drag             translate the active hand in the view plane
 *   shift+drag       rotate the active hand
 *   wheel            move along view depth
 *   1 / 2            choose left / right hand
 *   e                toggle engagement (stream frames without dragging)
 *   space (hold)     clutch the active hand
 *   q / a            close / open the gripper
 *   c                calibrate both sides
 *   m                toggle world/tool frame mode
 *   x                inject a demo wrench on the active side
 *   r                record the current pose as a reference entry
 *   [ / ]            preview previous / next reference ghost
 */

import { Chain, ReferenceEntry, parseChain, parseReferenceLibrary } from "./chain.js";
import { GatewayClient } from "./client.js";
import { InputMapper } from "./input.js";
import { SnapshotBuffer } from "./interp.js";
import { Vec3, vadd, vsub } from "./math.js";
import {
  Side,
  StateMessage,
  calibrateCommand,
  clutchCommand,
  frameCommand,
  injectWrenchCommand,
  recordRefCommand,
  setModeCommand,
} from "./protocol.js";
import { BASE_OFFSET, drawScene } from "./render.js";
import { createScene, sceneOnClose, sceneOnOpen, sceneOnState } from "./scene.js";

interface Anchors {
  /** Robot EE position when calibration was requested, per side. */
  ee: Partial<Record<Side, Vec3>>;
  /** Virtual hand position at the same moment, per side. */
  hand: Partial<Record<Side, Vec3>>;
}

function gatewayBase(): { http: string; ws: string } {
  const override = new URLSearchParams(location.search).get("server");
  const host = override ?? location.host;
  const secure = location.protocol === "https:" && !override;
  return {
    http: `${secure ? "https" : "http"}://${host}`,
    ws: `${secure ? "wss" : "ws"}://${host}/ws`,
  };
}

async function bootstrap(): Promise<void> {
  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const help = document.getElementById("help")!;
  const { http, ws } = gatewayBase();

  const scene = createScene();
  const buffer = new SnapshotBuffer();
  const mapper = new InputMapper();
  const anchors: Anchors = { ee: {}, hand: {} };
  let chains: Record<Side, Chain> | null = null;
  let library: ReferenceEntry[] = [];
  let frameMode = "world";
  let ghostIndex: number | null = null;
  let lastRumbleMs = 0;

  try {
    const [aboutRes, leftRes, rightRes, libRes] = await Promise.all([
      fetch(`${http}/about`),
      fetch(`${http}/chain/left`),
      fetch(`${http}/chain/right`),
      fetch(`${http}/reference-library`),
    ]);
    const about = await aboutRes.json();
    frameMode = about.frame_mode ?? "world";
    chains = {
      left: parseChain(await leftRes.text(), "left"),
      right: parseChain(await rightRes.text(), "right"),
    };
    library = parseReferenceLibrary(await libRes.text());
  } catch (exc) {
    help.textContent = `failed to load gateway resources: ${exc}`;
    return;
  }

  const client = new GatewayClient(ws, {
    onState: (msg: StateMessage) => {
      const now = performance.now();
      buffer.push(msg, now);
      sceneOnState(scene, msg, now);
    },
    onStatus: (status) => {
      if (status === "open") {
        sceneOnOpen(scene);
      } else if (status === "lost") {
        sceneOnClose(scene);
      }
    },
  });
  client.connect();

  function calibrate(): void {
    client.send(calibrateCommand("both", 0));
    const state = buffer.latestState;
    for (const side of ["left", "right"] as Side[]) {
      if (state) {
        anchors.ee[side] = [state[side].ee[0], state[side].ee[1], state[side].ee[2]];
      }
      anchors.hand[side] = [...mapper.hands[side].pos] as Vec3;
    }
  }

  function targetMarker(side: Side): Vec3 | undefined {
    const ee = anchors.ee[side];
    const hand = anchors.hand[side];
    if (!ee || !hand || frameMode !== "world") {
      return undefined;
    }
    return vadd(ee, vsub(mapper.hands[side].pos, hand));
  }

  // Pointer input: drags map through the camera's view plane implicitly
  // because the mapper's default axes match the renderer's world axes.
  let dragging = false;
  canvas.addEventListener("pointerdown", (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    dragging = true;
    mapper.engaged = true;
  });
  canvas.addEventListener("pointerup", (ev) => {
    canvas.releasePointerCapture(ev.pointerId);
    dragging = false;
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (dragging) {
      mapper.pointerDrag(ev.movementX, ev.movementY, ev.shiftKey);
    }
  });
  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    mapper.wheel(ev.deltaY);
  });

  window.addEventListener("keydown", (ev) => {
    if (ev.repeat && ev.key !== "q" && ev.key !== "a") {
      return;
    }
    switch (ev.key) {
      case "1":
        mapper.activeSide = "left";
        break;
      case "2":
        mapper.activeSide = "right";
        break;
      case "e":
        mapper.engaged = !mapper.engaged;
        break;
      case " ":
        ev.preventDefault();
        if (!mapper.clutched[mapper.activeSide]) {
          mapper.setClutched(mapper.activeSide, true);
          client.send(clutchCommand(mapper.activeSide, true, 0));
        }
        break;
      case "q":
        mapper.adjustGripper(0.05);
        break;
      case "a":
        mapper.adjustGripper(-0.05);
        break;
      case "c":
        calibrate();
        break;
      case "m":
        frameMode = frameMode === "world" ? "tool" : "world";
        client.send(setModeCommand(frameMode as "world" | "tool", 0));
        break;
      case "x":
        client.send(injectWrenchCommand(mapper.activeSide, [0, 0, -20, 0, 0, 0], 0));
        break;
      case "r": {
        const label = prompt("reference label", `pose_${Date.now() % 100000}`);
        if (label) {
          client.send(recordRefCommand(label, 0));
        }
        break;
      }
      case "[":
        if (library.length > 0) {
          ghostIndex = ((ghostIndex ?? scene.refIndex) - 1 + library.length) % library.length;
        }
        break;
      case "]":
        if (library.length > 0) {
          ghostIndex = ((ghostIndex ?? scene.refIndex) + 1) % library.length;
        }
        break;
    }
  });
  window.addEventListener("keyup", (ev) => {
    if (ev.key === " " && mapper.clutched[mapper.activeSide]) {
      mapper.setClutched(mapper.activeSide, false);
      client.send(clutchCommand(mapper.activeSide, false, 0));
    }
  });

  // Frame emission runs on its own timer so streaming holds at better
  // than 30 Hz even when the tab throttles animation frames.
  setInterval(() => {
    for (const record of mapper.tick(performance.now())) {
      client.send(frameCommand(record, 0));
    }
  }, 10);

  function rumble(): void {
    const now = performance.now();
    const vib = Math.max(scene.vib.left, scene.vib.right);
    if (vib < 0.05 || now - lastRumbleMs < 100) {
      return;
    }
    lastRumbleMs = now;
    for (const pad of navigator.getGamepads?.() ?? []) {
      const actuator = (pad as { vibrationActuator?: { playEffect?: Function } } | null)
        ?.vibrationActuator;
      try {
        actuator?.playEffect?.("dual-rumble", {
          duration: 80,
          strongMagnitude: Math.min(1, vib),
          weakMagnitude: Math.min(1, vib),
        });
      } catch {
        // no actuator available; the on-screen meter is authoritative
      }
    }
  }

  function frame(): void {
    const dpr = window.devicePixelRatio || 1;
    const w = canvas.clientWidth;
    const h = canvas.clientHeight;
    if (canvas.width !== w * dpr || canvas.height !== h * dpr) {
      canvas.width = w * dpr;
      canvas.height = h * dpr;
    }
    ctx.setTransform(dpr, 0, 0, dpr, 0, 0);
    const entry = library.length > 0 ? library[(ghostIndex ?? scene.refIndex) % library.length] : null;
    drawScene(ctx, w, h, {
      view: buffer.sample(performance.now()),
      scene,
      chains,
      ghost: entry ? { left: entry.left, right: entry.right } : null,
      targets: { left: targetMarker("left"), right: targetMarker("right") },
      activeSide: mapper.activeSide,
      clutched: mapper.clutched,
      frameMode,
    });
    rumble();
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
}

if (typeof document !== "undefined") {
  void bootstrap();
}

export { gatewayBase, BASE_OFFSET };
