/** Pointer and keyboard mapping to teleop frames.
 *
 * The mapper keeps one virtual hand pose per side and turns device events
 * into increments on the active hand: plain drags translate in the view
 * plane, the wheel moves along view depth, and modifier drags rotate
 * about the view axes. While engaged it emits frames for the active side
 * on every tick that clears the emit period (16 ms by default, so any
 * tick source at 30 Hz or faster streams at least 30 frames per second).
 * Clutching suppresses emission entirely and discards drag input, like
 * lifting a stylus; the server re-anchors on release so nothing jumps.
 *
 * The default translation scale maps screen distance 1:1 onto robot
 * meters for a 96 dpi display (one on-screen centimeter commands one
 * centimeter of hand motion).
 */

import { Quat, Vec3, axisAngleQuat, quatMul, quatNormalize, vadd, vscale } from "./math.js";
import { FrameRecord, Side } from "./protocol.js";

export interface MapperOptions {
  metersPerPixel: number;
  radiansPerPixel: number;
  metersPerWheelUnit: number;
  emitPeriodMs: number;
  viewRight: Vec3;
  viewUp: Vec3;
  viewForward: Vec3;
}

export const MAPPER_DEFAULTS: MapperOptions = {
  metersPerPixel: 0.01 / 37.7952755906,
  radiansPerPixel: 0.005,
  metersPerWheelUnit: 2e-4,
  emitPeriodMs: 16,
  viewRight: [1, 0, 0],
  viewUp: [0, 0, 1],
  viewForward: [0, 1, 0],
};

export interface HandPose {
  pos: Vec3;
  quat: Quat;
}

export class InputMapper {
  readonly options: MapperOptions;
  activeSide: Side = "left";
  engaged = false;
  clutched: Record<Side, boolean> = { left: false, right: false };
  gripper: Record<Side, number> = { left: 0, right: 0 };
  hands: Record<Side, HandPose> = {
    left: { pos: [0, 0, 0], quat: [1, 0, 0, 0] },
    right: { pos: [0, 0, 0], quat: [1, 0, 0, 0] },
  };
  private lastEmitMs = Number.NEGATIVE_INFINITY;
  private lastT = 0;

  constructor(options: Partial<MapperOptions> = {}) {
    this.options = { ...MAPPER_DEFAULTS, ...options };
  }

  /** Drag by (dxPx, dyPx) screen pixels; rotate instead of translate when
   * the modifier is held. Ignored unless engaged and not clutched. */
  pointerDrag(dxPx: number, dyPx: number, rotate = false): void {
    if (!this.engaged || this.clutched[this.activeSide]) {
      return;
    }
    const hand = this.hands[this.activeSide];
    if (rotate) {
      const yaw = axisAngleQuat(this.options.viewUp, -dxPx * this.options.radiansPerPixel);
      const pitch = axisAngleQuat(this.options.viewRight, -dyPx * this.options.radiansPerPixel);
      hand.quat = quatNormalize(quatMul(quatMul(yaw, pitch), hand.quat));
      return;
    }
    const right = vscale(this.options.viewRight, dxPx * this.options.metersPerPixel);
    const up = vscale(this.options.viewUp, -dyPx * this.options.metersPerPixel);
    hand.pos = vadd(vadd(hand.pos, right), up);
  }

  /** Scroll toward/away from the viewer: negative deltaY moves deeper. */
  wheel(deltaY: number): void {
    if (!this.engaged || this.clutched[this.activeSide]) {
      return;
    }
    const hand = this.hands[this.activeSide];
    hand.pos = vadd(hand.pos, vscale(this.options.viewForward, -deltaY * this.options.metersPerWheelUnit));
  }

  adjustGripper(delta: number): void {
    const side = this.activeSide;
    this.gripper[side] = Math.min(1, Math.max(0, this.gripper[side] + delta));
  }

  setClutched(side: Side, engaged: boolean): void {
    this.clutched[side] = engaged;
  }

  /** Emit due frames for the active hand. Returns [] when disengaged,
   * clutched, or inside the emit period. Timestamps strictly increase. */
  tick(nowMs: number): FrameRecord[] {
    if (!this.engaged || this.clutched[this.activeSide]) {
      return [];
    }
    if (nowMs - this.lastEmitMs < this.options.emitPeriodMs) {
      return [];
    }
    this.lastEmitMs = nowMs;
    const side = this.activeSide;
    const hand = this.hands[side];
    const t = Math.max(nowMs / 1000, this.lastT + 1e-6);
    this.lastT = t;
    return [
      {
        t,
        side,
        pos: [...hand.pos],
        quat: [...hand.quat],
        gripper: this.gripper[side],
        buttons: 0,
      },
    ];
  }
}
