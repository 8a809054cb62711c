/** Client scene bookkeeping: connection status, watchdog banners, meters.
 *
 * Pure state transitions over incoming server messages, so the logic is
 * testable without a DOM. The renderer reads this record every frame; a
 * watchdog event therefore reaches the screen on the next rendered frame.
 * Banners stick for a short hold time so single-tick trips stay visible;
 * the same hold applies to the input-filtered indicator, which flags
 * frames the server's hygiene filter discarded (rejects counter). */

import { Side, StateMessage } from "./protocol.js";

export type ConnectionStatus = "connecting" | "open" | "lost";

export interface SceneFlags {
  connection: ConnectionStatus;
  lastState: StateMessage | null;
  banner: { left: boolean; right: boolean };
  bannerHoldUntilMs: { left: number; right: number };
  prevTrips: { left: number; right: number };
  /** True while the server is discarding this side's input frames. */
  filtered: { left: boolean; right: boolean };
  filteredHoldUntilMs: { left: number; right: number };
  prevRejects: { left: number; right: number };
  vib: { left: number; right: number };
  tau: { left: number; right: number };
  refIndex: number;
  drops: number;
}

export const BANNER_HOLD_MS = 1500;

export function createScene(): SceneFlags {
  return {
    connection: "connecting",
    lastState: null,
    banner: { left: false, right: false },
    bannerHoldUntilMs: { left: 0, right: 0 },
    prevTrips: { left: 0, right: 0 },
    filtered: { left: false, right: false },
    filteredHoldUntilMs: { left: 0, right: 0 },
    prevRejects: { left: 0, right: 0 },
    vib: { left: 0, right: 0 },
    tau: { left: 0, right: 0 },
    refIndex: 0,
    drops: 0,
  };
}

export function sceneOnOpen(scene: SceneFlags): void {
  scene.connection = "open";
}

export function sceneOnClose(scene: SceneFlags): void {
  scene.connection = "lost";
}

export function sceneOnState(scene: SceneFlags, msg: StateMessage, nowMs: number): void {
  scene.lastState = msg;
  scene.refIndex = msg.ref;
  scene.drops = msg.drops;
  for (const side of ["left", "right"] as Side[]) {
    const rep = msg[side];
    const tripped = rep.watchdog.state !== "ok" || rep.watchdog.trips > scene.prevTrips[side];
    if (tripped) {
      scene.bannerHoldUntilMs[side] = nowMs + BANNER_HOLD_MS;
    }
    scene.banner[side] = tripped || nowMs < scene.bannerHoldUntilMs[side];
    scene.prevTrips[side] = rep.watchdog.trips;
    const filtering = rep.rejects > scene.prevRejects[side];
    if (filtering) {
      scene.filteredHoldUntilMs[side] = nowMs + BANNER_HOLD_MS;
    }
    scene.filtered[side] = filtering || nowMs < scene.filteredHoldUntilMs[side];
    scene.prevRejects[side] = rep.rejects;
    scene.vib[side] = rep.haptic.vib;
    scene.tau[side] = rep.haptic.tau;
  }
}
