/**
 * Canvas renderer: obstacles, crowd, robot, executed trail, predictive
 * modes with weight-proportional opacity, and the chosen trajectory.
 */

import { isStale } from './client.js';
import type { ModeMsg, Point, TrajectoryMsg, ViewState } from './types.js';

interface Camera {
  scale: number;
  ox: number;
  oy: number;
}

function camera(view: ViewState, width: number, height: number): Camera {
  let xs: number[] = [0, 6];
  let ys: number[] = [-3, 3];
  if (view.hello) {
    xs = [-1, view.hello.goal[0] + 1];
    ys = [-4, 4];
    for (const ob of view.hello.obstacles) {
      if (ob.type === 'circle') {
        ys.push(ob.center[1] - ob.radius - 1, ob.center[1] + ob.radius + 1);
      } else {
        ys.push(ob.ymin - 1, ob.ymax + 1);
      }
    }
  }
  const spanX = Math.max(...xs) - Math.min(...xs);
  const spanY = Math.max(...ys) - Math.min(...ys);
  const scale = Math.min(width / spanX, height / spanY);
  return { scale, ox: Math.min(...xs), oy: Math.max(...ys) };
}

function toScreen(cam: Camera, p: Point): Point {
  return [(p[0] - cam.ox) * cam.scale, (cam.oy - p[1]) * cam.scale];
}

function drawPath(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  points: Point[],
  color: string,
  width: number,
  alpha: number,
): void {
  if (points.length < 2) return;
  ctx.save();
  ctx.globalAlpha = alpha;
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  const [x0, y0] = toScreen(cam, points[0]);
  ctx.moveTo(x0, y0);
  for (const p of points.slice(1)) {
    const [x, y] = toScreen(cam, p);
    ctx.lineTo(x, y);
  }
  ctx.stroke();
  ctx.restore();
}

function drawModes(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  modes: ModeMsg[],
  color: string,
): void {
  for (const mode of modes) {
    drawPath(ctx, cam, mode.points, color, 3, 0.15 + 0.75 * mode.weight);
  }
}

function drawDot(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  p: Point,
  radiusPx: number,
  color: string,
): void {
  const [x, y] = toScreen(cam, p);
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.arc(x, y, radiusPx, 0, 2 * Math.PI);
  ctx.fill();
}

export function render(
  view: ViewState,
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  nowMs: number,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = '#fafafa';
  ctx.fillRect(0, 0, width, height);
  const cam = camera(view, width, height);

  // grid
  ctx.strokeStyle = '#e4e4e4';
  ctx.lineWidth = 1;
  for (let gx = -2; gx < 14; gx += 1) {
    const [sx] = toScreen(cam, [gx, 0]);
    ctx.beginPath();
    ctx.moveTo(sx, 0);
    ctx.lineTo(sx, height);
    ctx.stroke();
  }
  for (let gy = -6; gy < 7; gy += 1) {
    const [, sy] = toScreen(cam, [0, gy]);
    ctx.beginPath();
    ctx.moveTo(0, sy);
    ctx.lineTo(width, sy);
    ctx.stroke();
  }

  if (view.hello) {
    ctx.fillStyle = '#c9c9c9';
    for (const ob of view.hello.obstacles) {
      if (ob.type === 'circle') {
        const [x, y] = toScreen(cam, ob.center);
        ctx.beginPath();
        ctx.arc(x, y, ob.radius * cam.scale, 0, 2 * Math.PI);
        ctx.fill();
      } else {
        const [x0, y0] = toScreen(cam, [ob.xmin, ob.ymax]);
        ctx.fillRect(x0, y0, (ob.xmax - ob.xmin) * cam.scale, (ob.ymax - ob.ymin) * cam.scale);
      }
    }
    drawDot(ctx, cam, view.hello.goal, 7, '#d62728');
  }

  const state = view.state;
  if (state) {
    drawModes(ctx, cam, state.operator_modes, '#9467bd');
    drawModes(ctx, cam, state.autonomy_modes, '#1f77b4');
    drawPath(ctx, cam, state.operator_mean.points, '#9467bd', 1.5, 0.9);
    drawPath(ctx, cam, state.chosen.points, '#ff7f0e', 3.5, 0.95);
    drawPath(ctx, cam, view.trail, '#2c2c2c', 2, 0.8);
    for (const ped of state.crowd) drawDot(ctx, cam, ped, 6, '#e377c2');
    drawDot(ctx, cam, state.robot, 8, '#2ca02c');
  }

  if (isStale(view, nowMs)) {
    ctx.fillStyle = 'rgba(128, 128, 128, 0.45)';
    ctx.fillRect(0, 0, width, height);
    ctx.fillStyle = '#222';
    ctx.font = '16px sans-serif';
    ctx.fillText('stale: no state for > 3 ticks', 16, 28);
  }

  if (view.errorBanner) {
    ctx.fillStyle = 'rgba(180, 30, 30, 0.92)';
    ctx.fillRect(0, 0, width, 30);
    ctx.fillStyle = '#fff';
    ctx.font = '13px sans-serif';
    ctx.fillText(view.errorBanner, 10, 20);
  }
}
