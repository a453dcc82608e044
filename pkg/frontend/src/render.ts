// Pure view-model builders: everything on screen derives from session state.

import type { BasicPoseSet } from "./api.js";
import type { HistoryEntry, SessionState } from "./session.js";
import { tokenDiff, type DiffToken } from "./diff.js";

// skeleton edge list over the 18-joint layout (matches the service's pose order)
export const SKELETON_EDGES: ReadonlyArray<[number, number]> = [
  [0, 1], [1, 2], [2, 3], [3, 4], [1, 5], [5, 6], [6, 7],
  [1, 8], [8, 9], [9, 10], [1, 11], [11, 12], [12, 13],
  [0, 14], [14, 16], [0, 15], [15, 17],
];

export interface OverlaySegment {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export interface OverlayPoint {
  x: number;
  y: number;
}

export interface PoseOverlay {
  points: OverlayPoint[];
  segments: OverlaySegment[];
}

/** Skeleton overlay geometry scaled onto a canvas of the given size. */
export function poseOverlay(
  pose: number[][],
  frame: [number, number],
  canvasWidth: number,
  canvasHeight: number,
): PoseOverlay {
  const [frameH, frameW] = frame;
  const sx = canvasWidth / frameW;
  const sy = canvasHeight / frameH;
  const visible = (j: number) => pose[j] && pose[j][2] > 0.5;
  const points: OverlayPoint[] = [];
  for (let j = 0; j < pose.length; j++) {
    if (visible(j)) points.push({ x: pose[j][0] * sx, y: pose[j][1] * sy });
  }
  const segments: OverlaySegment[] = [];
  for (const [a, b] of SKELETON_EDGES) {
    if (a < pose.length && b < pose.length && visible(a) && visible(b)) {
      segments.push({
        x1: pose[a][0] * sx,
        y1: pose[a][1] * sy,
        x2: pose[b][0] * sx,
        y2: pose[b][1] * sy,
      });
    }
  }
  return { points, segments };
}

export interface HistoryItemView {
  index: number;
  caption: string;
  image: string;
  pose: number[][] | null;
  orientation: number;
  latencyMs: number;
  diff: DiffToken[]; // vs the previous entry's caption
}

/** History rendering is a pure function of session state. */
export function historyView(state: SessionState): HistoryItemView[] {
  return state.history.map((entry: HistoryEntry, index: number) => ({
    index,
    caption: entry.caption,
    image: entry.image,
    pose: entry.pose,
    orientation: entry.orientation,
    latencyMs: entry.latencyMs,
    diff: tokenDiff(index > 0 ? state.history[index - 1].caption : entry.caption, entry.caption),
  }));
}

export interface BasicPoseView {
  index: number;
  phrase: string;
  pose: number[][];
  frame: [number, number];
}

// one phrase per basic orientation; mirrors the training-side augmentation
export const ORIENTATION_PHRASES = [
  "facing the camera",
  "facing the camera turned slightly right",
  "facing right",
  "facing away turned slightly right",
  "facing away from the camera",
  "facing away turned slightly left",
  "facing left",
  "facing the camera turned slightly left",
];

export function basicPoseGallery(basics: BasicPoseSet): BasicPoseView[] {
  return basics.poses.map((pose, index) => ({
    index,
    phrase: ORIENTATION_PHRASES[index % ORIENTATION_PHRASES.length],
    pose,
    frame: basics.frame,
  }));
}
