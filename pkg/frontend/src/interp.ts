/** Two-snapshot interpolation buffer for smooth rendering.
 *
 * The gateway streams decimated states at a fixed cadence; render frames
 * fall between arrivals. The buffer keeps the two most recent committed
 * states and blends from the older toward the newer over one estimated
 * arrival period. Alpha is clamped at 1, so the view never extrapolates
 * past data the server actually sent.
 */

import { Quat, Vec3, quatNlerp, vlerp } from "./math.js";
import { SideState, StateMessage } from "./protocol.js";

export interface SideView {
  q: number[];
  eePos: Vec3;
  eeQuat: Quat;
  gripper: number;
}

export interface SceneView {
  left: SideView;
  right: SideView;
  /** The newest committed state; discrete fields read from here. */
  state: StateMessage;
}

function sideView(side: SideState): SideView {
  return {
    q: [...side.q],
    eePos: [side.ee[0], side.ee[1], side.ee[2]],
    eeQuat: [side.ee[3], side.ee[4], side.ee[5], side.ee[6]],
    gripper: side.gripper,
  };
}

function blendSide(a: SideState, b: SideState, alpha: number): SideView {
  const q = a.q.map((v, i) => v + (b.q[i] - v) * alpha);
  const posA: Vec3 = [a.ee[0], a.ee[1], a.ee[2]];
  const posB: Vec3 = [b.ee[0], b.ee[1], b.ee[2]];
  const quatA: Quat = [a.ee[3], a.ee[4], a.ee[5], a.ee[6]];
  const quatB: Quat = [b.ee[3], b.ee[4], b.ee[5], b.ee[6]];
  return {
    q,
    eePos: vlerp(posA, posB, alpha),
    eeQuat: quatNlerp(quatA, quatB, alpha),
    gripper: a.gripper + (b.gripper - a.gripper) * alpha,
  };
}

export class SnapshotBuffer {
  private prev: StateMessage | null = null;
  private latest: StateMessage | null = null;
  private latestArrivedMs = 0;
  private periodMs: number;

  constructor(initialPeriodMs = 16) {
    this.periodMs = initialPeriodMs;
  }

  get estimatedPeriodMs(): number {
    return this.periodMs;
  }

  get latestState(): StateMessage | null {
    return this.latest;
  }

  push(state: StateMessage, nowMs: number): void {
    if (this.latest !== null) {
      const gap = nowMs - this.latestArrivedMs;
      if (gap > 0 && gap < 1000) {
        this.periodMs = 0.8 * this.periodMs + 0.2 * gap;
      }
    }
    this.prev = this.latest;
    this.latest = state;
    this.latestArrivedMs = nowMs;
  }

  /** Blended view at render time; null until the first state arrives. */
  sample(nowMs: number): SceneView | null {
    if (this.latest === null) {
      return null;
    }
    if (this.prev === null) {
      return { left: sideView(this.latest.left), right: sideView(this.latest.right), state: this.latest };
    }
    const alpha = Math.min(Math.max((nowMs - this.latestArrivedMs) / this.periodMs, 0), 1);
    return {
      left: blendSide(this.prev.left, this.latest.left, alpha),
      right: blendSide(this.prev.right, this.latest.right, alpha),
      state: this.latest,
    };
  }
}
