import { describe, expect, it } from "vitest";

import {
    clampToBounds,
    downsamplePath,
    DragRecorder,
    PointerSample,
} from "../src/recorder.js";

const BOUNDS = { xMin: -4, xMax: 4, yMin: -3, yMax: 3 };

function circlePath(
    radius: number, seconds: number, hz: number, turns = 1,
): PointerSample[] {
    const samples: PointerSample[] = [];
    const n = Math.round(seconds * hz);
    for (let i = 0; i <= n; i++) {
        const t = i / hz;
        // compass parametrization: bearing grows clockwise from north
        const bearing = (2 * Math.PI * turns * i) / n;
        samples.push({
            t,
            x: radius * Math.sin(bearing),
            y: radius * Math.cos(bearing),
        });
    }
    return samples;
}

describe("downsamplePath", () => {
    it("emits one sample per period tick", () => {
        const raw = circlePath(2, 4, 60);
        const out = downsamplePath(raw, 1 / 20);
        expect(out.length).toBe(81); // ticks 0..80 inclusive
        for (let i = 0; i < out.length; i++) {
            expect(out[i].t).toBeCloseTo(i / 20, 9);
        }
    });

    it("is deterministic", () => {
        const raw = circlePath(2, 4, 60);
        expect(downsamplePath(raw, 1 / 20)).toEqual(downsamplePath(raw, 1 / 20));
    });

    it("holds the last known position between sparse samples", () => {
        const raw: PointerSample[] = [
            { t: 0, x: 0, y: 0 },
            { t: 0.3, x: 1, y: 0 },
        ];
        const out = downsamplePath(raw, 0.1);
        expect(out.map((s) => s.x)).toEqual([0, 0, 0, 1]);
    });

    it("handles empty input", () => {
        expect(downsamplePath([], 0.05)).toEqual([]);
    });
});

describe("clampToBounds", () => {
    it("passes inside points through", () => {
        expect(clampToBounds(1, 1, BOUNDS)).toEqual({ x: 1, y: 1, clamped: false });
    });

    it("clamps and flags outside points", () => {
        expect(clampToBounds(9, -9, BOUNDS)).toEqual({ x: 4, y: -3, clamped: true });
    });
});

describe("DragRecorder", () => {
    const scene = [
        { id: "block_red", pos: [2, 0] as [number, number], yaw: 0 },
        { id: "block_green", pos: [0, 0] as [number, number], yaw: 0 },
    ];

    it("snapshots the initial arrangement as frame 0", () => {
        const rec = new DragRecorder(1 / 20, BOUNDS);
        rec.begin(scene);
        const frames = rec.finish();
        expect(frames.length).toBe(1);
        expect(frames[0].t).toBe(0);
        expect(frames[0].objects.map((o) => o.id).sort()).toEqual(
            ["block_green", "block_red"]);
    });

    it("moves only the dragged block and keeps time monotone", () => {
        const rec = new DragRecorder(1 / 20, BOUNDS);
        rec.begin(scene);
        rec.drag("block_red", circlePath(2, 4, 60));
        const frames = rec.finish();
        expect(frames.length).toBe(82); // initial + 81 drag ticks
        for (let i = 1; i < frames.length; i++) {
            expect(frames[i].t).toBeGreaterThan(frames[i - 1].t);
        }
        for (const frame of frames) {
            const green = frame.objects.find((o) => o.id === "block_green")!;
            expect(green.pos).toEqual([0, 0]);
        }
    });

    it("accumulates several drags into one demonstration", () => {
        const rec = new DragRecorder(1 / 20, BOUNDS);
        rec.begin(scene);
        const first = rec.drag("block_red", [
            { t: 0, x: 2, y: 0 }, { t: 0.1, x: 2, y: 0.5 },
        ]);
        const second = rec.drag("block_red", [
            { t: 0, x: 2, y: 0.5 }, { t: 0.1, x: 2, y: 1.0 },
        ]);
        expect(rec.finish().length).toBe(
            1 + first.frames.length + second.frames.length);
    });

    it("clamps drags that leave the table and reports it", () => {
        const rec = new DragRecorder(1 / 20, BOUNDS);
        rec.begin(scene);
        const result = rec.drag("block_red", [
            { t: 0, x: 2, y: 0 }, { t: 0.1, x: 99, y: 0 },
        ]);
        expect(result.clamped).toBe(true);
        const last = rec.finish().at(-1)!;
        const red = last.objects.find((o) => o.id === "block_red")!;
        expect(red.pos[0]).toBe(BOUNDS.xMax);
    });

    it("rejects unknown blocks", () => {
        const rec = new DragRecorder();
        rec.begin(scene);
        expect(() => rec.drag("ghost", [{ t: 0, x: 0, y: 0 }])).toThrow(
            /unknown block/);
    });

    it("records a static drag as zero-movement frames", () => {
        const rec = new DragRecorder(1 / 20, BOUNDS);
        rec.begin(scene);
        rec.drag("block_red", [
            { t: 0, x: 2, y: 0 }, { t: 0.2, x: 2, y: 0 },
        ]);
        const frames = rec.finish();
        const positions = new Set(frames.map((f) =>
            JSON.stringify(f.objects.find((o) => o.id === "block_red")!.pos)));
        expect(positions.size).toBe(1);
    });
});
