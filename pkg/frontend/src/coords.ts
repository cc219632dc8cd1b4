// View <-> device coordinate math. The controller maps captured positions
// with round-half-up scaling and a clamp into device bounds; the console
// mirrors that here so it can size views and predict where clicks land.

export interface Size {
  w: number;
  h: number;
}

export interface Point {
  x: number;
  y: number;
}

export function mapToDevice(p: Point, view: Size, device: Size): Point {
  if (view.w <= 0 || view.h <= 0) {
    throw new Error("view size must be positive");
  }
  const x = Math.floor((p.x * device.w) / view.w + 0.5);
  const y = Math.floor((p.y * device.h) / view.h + 0.5);
  return {
    x: Math.min(Math.max(x, 0), device.w),
    y: Math.min(Math.max(y, 0), device.h),
  };
}

export function deviceToView(p: Point, view: Size, device: Size): Point {
  return {
    x: (p.x * view.w) / device.w,
    y: (p.y * view.h) / device.h,
  };
}

// Largest view that fits the box while preserving the device aspect ratio.
export function fitView(device: Size, maxW: number, maxH: number): Size {
  const scale = Math.min(maxW / device.w, maxH / device.h);
  return {
    w: Math.max(1, Math.round(device.w * scale)),
    h: Math.max(1, Math.round(device.h * scale)),
  };
}
