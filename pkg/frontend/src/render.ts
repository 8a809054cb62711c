/** Canvas renderer: projects both arm skeletons, the reference ghost, and
 * the HUD (watchdog banners, vibration meters, status line) in one pass.
 *
 * The camera is orthographic: world points map onto the screen through a
 * right/up basis derived from azimuth and elevation, scaled in pixels per
 * meter. Everything drawn comes from committed server state (via the
 * interpolation buffer) plus static chain geometry; nothing here predicts
 * robot motion.
 */

import { Chain, linkPoints } from "./chain.js";
import { Vec3, vdot } from "./math.js";
import { SceneView } from "./interp.js";
import { SceneFlags } from "./scene.js";
import { Side } from "./protocol.js";

export interface Camera {
  azimuthRad: number;
  elevationRad: number;
  scalePxPerM: number;
  centerX: number;
  centerY: number;
}

export interface CameraBasis {
  right: Vec3;
  up: Vec3;
  forward: Vec3;
}

export function defaultCamera(width: number, height: number): Camera {
  return {
    azimuthRad: -0.5,
    elevationRad: 0.35,
    scalePxPerM: Math.min(width, height) * 0.55,
    centerX: width / 2,
    centerY: height * 0.62,
  };
}

/** Screen axes of the camera: right and up span the view plane, forward
 * points into the scene. World frame is z-up. */
export function cameraBasis(cam: Camera): CameraBasis {
  const ca = Math.cos(cam.azimuthRad);
  const sa = Math.sin(cam.azimuthRad);
  const ce = Math.cos(cam.elevationRad);
  const se = Math.sin(cam.elevationRad);
  const forward: Vec3 = [ca * ce, sa * ce, -se];
  const right: Vec3 = [-sa, ca, 0];
  const up: Vec3 = [ca * se, sa * se, ce];
  return { right, up, forward };
}

export function project(cam: Camera, basis: CameraBasis, p: Vec3): [number, number] {
  return [
    cam.centerX + vdot(basis.right, p) * cam.scalePxPerM,
    cam.centerY - vdot(basis.up, p) * cam.scalePxPerM,
  ];
}

export interface RenderInputs {
  view: SceneView | null;
  scene: SceneFlags;
  chains: Record<Side, Chain> | null;
  /** Joint targets of the selected reference entry, for the ghost. */
  ghost: Record<Side, number[]> | null;
  /** Commanded target markers in each arm's base frame, if known. */
  targets: Partial<Record<Side, Vec3>>;
  activeSide: Side;
  clutched: Record<Side, boolean>;
  frameMode: string;
}

export const BASE_OFFSET: Record<Side, Vec3> = {
  left: [0, 0.35, 0],
  right: [0, -0.35, 0],
};

const ARM_COLOR: Record<Side, string> = { left: "#4fc3f7", right: "#ffb74d" };

function offset(p: Vec3, side: Side): Vec3 {
  const o = BASE_OFFSET[side];
  return [p[0] + o[0], p[1] + o[1], p[2] + o[2]];
}

function drawPolyline(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  basis: CameraBasis,
  pts: Vec3[],
  side: Side,
  style: { color: string; width: number; dashed?: boolean },
): void {
  ctx.save();
  ctx.strokeStyle = style.color;
  ctx.lineWidth = style.width;
  ctx.lineJoin = "round";
  ctx.lineCap = "round";
  if (style.dashed) {
    ctx.setLineDash([6, 6]);
  }
  ctx.beginPath();
  pts.forEach((p, i) => {
    const [x, y] = project(cam, basis, offset(p, side));
    if (i === 0) {
      ctx.moveTo(x, y);
    } else {
      ctx.lineTo(x, y);
    }
  });
  ctx.stroke();
  ctx.restore();
}

function drawGround(ctx: CanvasRenderingContext2D, cam: Camera, basis: CameraBasis): void {
  ctx.save();
  ctx.strokeStyle = "rgba(255,255,255,0.08)";
  ctx.lineWidth = 1;
  const half = 0.8;
  const step = 0.2;
  for (let i = -4; i <= 4; i++) {
    const a = project(cam, basis, [i * step, -half, 0]);
    const b = project(cam, basis, [i * step, half, 0]);
    ctx.beginPath();
    ctx.moveTo(a[0], a[1]);
    ctx.lineTo(b[0], b[1]);
    ctx.stroke();
    const c = project(cam, basis, [-half, i * step, 0]);
    const d = project(cam, basis, [half, i * step, 0]);
    ctx.beginPath();
    ctx.moveTo(c[0], c[1]);
    ctx.lineTo(d[0], d[1]);
    ctx.stroke();
  }
  ctx.restore();
}

function drawArm(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  basis: CameraBasis,
  chain: Chain,
  q: number[],
  side: Side,
  inputs: RenderInputs,
  gripper: number,
): void {
  const pts = linkPoints(chain, q);
  drawPolyline(ctx, cam, basis, pts, side, {
    color: ARM_COLOR[side],
    width: side === inputs.activeSide ? 5 : 3.5,
  });
  ctx.save();
  ctx.fillStyle = ARM_COLOR[side];
  for (const p of pts.slice(0, -1)) {
    const [x, y] = project(cam, basis, offset(p, side));
    ctx.beginPath();
    ctx.arc(x, y, 4, 0, Math.PI * 2);
    ctx.fill();
  }
  const tip = pts[pts.length - 1];
  const [tx, ty] = project(cam, basis, offset(tip, side));
  ctx.strokeStyle = ARM_COLOR[side];
  ctx.lineWidth = 2;
  const jaw = 4 + 8 * (1 - gripper);
  ctx.strokeRect(tx - jaw, ty - jaw, 2 * jaw, 2 * jaw);
  if (inputs.clutched[side]) {
    ctx.fillStyle = "rgba(255,255,255,0.75)";
    ctx.font = "11px system-ui, sans-serif";
    ctx.fillText("clutched", tx + 10, ty - 10);
  }
  ctx.restore();
}

function drawTarget(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  basis: CameraBasis,
  target: Vec3,
  side: Side,
): void {
  const [x, y] = project(cam, basis, offset(target, side));
  ctx.save();
  ctx.strokeStyle = "#e57373";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.moveTo(x - 8, y);
  ctx.lineTo(x + 8, y);
  ctx.moveTo(x, y - 8);
  ctx.lineTo(x, y + 8);
  ctx.stroke();
  ctx.beginPath();
  ctx.arc(x, y, 5, 0, Math.PI * 2);
  ctx.stroke();
  ctx.restore();
}

function drawMeter(
  ctx: CanvasRenderingContext2D,
  x: number,
  y: number,
  width: number,
  label: string,
  value: number,
  color: string,
): void {
  ctx.save();
  ctx.fillStyle = "rgba(255,255,255,0.15)";
  ctx.fillRect(x, y, width, 10);
  ctx.fillStyle = color;
  ctx.fillRect(x, y, width * Math.min(1, Math.max(0, value)), 10);
  ctx.fillStyle = "rgba(255,255,255,0.8)";
  ctx.font = "11px system-ui, sans-serif";
  ctx.fillText(label, x, y - 4);
  ctx.restore();
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  inputs: RenderInputs,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#10141a";
  ctx.fillRect(0, 0, width, height);
  const cam = defaultCamera(width, height);
  const basis = cameraBasis(cam);
  drawGround(ctx, cam, basis);

  if (inputs.chains && inputs.view) {
    for (const side of ["left", "right"] as Side[]) {
      if (inputs.ghost) {
        drawPolyline(ctx, cam, basis, linkPoints(inputs.chains[side], inputs.ghost[side]), side, {
          color: "rgba(255,255,255,0.25)",
          width: 2,
          dashed: true,
        });
      }
      drawArm(ctx, cam, basis, inputs.chains[side], inputs.view[side].q, side, inputs, inputs.view[side].gripper);
      const target = inputs.targets[side];
      if (target) {
        drawTarget(ctx, cam, basis, target, side);
      }
    }
  }

  // HUD: vibration meters always visible, one per side.
  drawMeter(ctx, 16, height - 24, 140, `L vib ${inputs.scene.vib.left.toFixed(2)}`, inputs.scene.vib.left, "#4fc3f7");
  drawMeter(ctx, width - 156, height - 24, 140, `R vib ${inputs.scene.vib.right.toFixed(2)}`, inputs.scene.vib.right, "#ffb74d");

  // Watchdog banners across the top.
  for (const side of ["left", "right"] as Side[]) {
    if (!inputs.scene.banner[side]) {
      continue;
    }
    const x = side === "left" ? 0 : width / 2;
    ctx.fillStyle = "rgba(229,57,53,0.85)";
    ctx.fillRect(x, 0, width / 2, 28);
    ctx.fillStyle = "#fff";
    ctx.font = "bold 13px system-ui, sans-serif";
    const trips = inputs.scene.lastState?.[side].watchdog.trips ?? 0;
    ctx.fillText(`${side.toUpperCase()} WATCHDOG (trips: ${trips})`, x + 12, 19);
  }

  // Input-filtered chips under the banner strip: the server is
  // discarding this side's frames (implausible motion or bad stamps).
  for (const side of ["left", "right"] as Side[]) {
    if (!inputs.scene.filtered[side]) {
      continue;
    }
    const x = side === "left" ? 12 : width / 2 + 12;
    ctx.fillStyle = "rgba(255,179,0,0.9)";
    ctx.fillRect(x, 34, 128, 20);
    ctx.fillStyle = "#1a1a1a";
    ctx.font = "bold 11px system-ui, sans-serif";
    const rejects = inputs.scene.lastState?.[side].rejects ?? 0;
    ctx.fillText(`input filtered (${rejects})`, x + 8, 48);
  }

  // Status line.
  ctx.fillStyle = "rgba(255,255,255,0.7)";
  ctx.font = "12px system-ui, sans-serif";
  const state = inputs.scene.lastState;
  const status =
    `${inputs.scene.connection}  tick ${state?.tick ?? "-"}  ref ${inputs.scene.refIndex}` +
    `  drops ${inputs.scene.drops}  mode ${inputs.frameMode}  active ${inputs.activeSide}`;
  ctx.fillText(status, 16, height - 44);

  if (inputs.scene.connection === "lost") {
    ctx.fillStyle = "rgba(16,20,26,0.8)";
    ctx.fillRect(0, 0, width, height);
    ctx.fillStyle = "#fff";
    ctx.font = "bold 18px system-ui, sans-serif";
    ctx.textAlign = "center";
    ctx.fillText("connection lost, reconnecting", width / 2, height / 2);
    ctx.textAlign = "start";
  }
}
