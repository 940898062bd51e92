/**
 * Browser entry point. Wires the canvas table, the question panel and the
 * playback loop to a WebSocket session (`blockteach serve --transport ws`).
 */

import { WebSocketChannel } from "./channel.js";
import { SessionClient } from "./client.js";
import { PlaybackBuffer } from "./playback.js";
import { ObjectPoseDoc } from "./protocol.js";
import { QuestionPanel, struckThrough } from "./questionPanel.js";
import { DragRecorder, PointerSample, TableBounds } from "./recorder.js";
import { CanvasScene, screenToWorld, ViewTransform } from "./sceneView.js";

const BOUNDS: TableBounds = { xMin: -4, xMax: 4, yMin: -3, yMax: 3 };
const BLOCK_SIZE = 0.5;

const INITIAL_SCENE: ObjectPoseDoc[] = [
    { id: "block_red", pos: [2.0, 0.0], yaw: 0 },
    { id: "block_green", pos: [0.0, 0.0], yaw: 0 },
];
const ROLES = { A: "block_red", B: "block_green" };
const DESCRIPTORS = {
    block_red: "the red block",
    block_green: "the green block",
};

function el<T extends HTMLElement>(id: string): T {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
}

export async function start(): Promise<void> {
    const canvas = el<HTMLCanvasElement>("table");
    const ctx = canvas.getContext("2d")!;
    const transform: ViewTransform = {
        scale: 70,
        originX: canvas.width / 2,
        originY: canvas.height / 2,
    };
    const scene = new CanvasScene(ctx, transform, BOUNDS, BLOCK_SIZE,
                                  DESCRIPTORS,
                                  { t: 0, objects: INITIAL_SCENE });
    const recorder = new DragRecorder(1 / 20, BOUNDS);
    recorder.begin(INITIAL_SCENE);

    const questionText = el<HTMLDivElement>("question");
    const scrollback = el<HTMLUListElement>("scrollback");
    const yesButton = el<HTMLButtonElement>("yes");
    const noButton = el<HTMLButtonElement>("no");
    const banner = el<HTMLDivElement>("banner");
    const throttle = el<HTMLInputElement>("throttle");

    const panel = new QuestionPanel((state) => {
        questionText.textContent =
            state.active?.text
            ?? (state.done ? "Concept learned:\n" +
                state.confirmedSummary.map((s) => `• ${s}`).join("\n") : "");
        yesButton.disabled = noButton.disabled = !panel.buttonsEnabled;
        banner.textContent = state.errorBanner ?? "";
        scrollback.replaceChildren(...state.scrollback.map((entry) => {
            const item = document.createElement("li");
            item.textContent = `${entry.text} [${entry.status}]`;
            if (struckThrough(entry)) item.style.textDecoration = "line-through";
            return item;
        }));
    });

    const playback = new PlaybackBuffer(
        (view) => {
            scene.setFrame(view.frame.frame);
            banner.textContent = view.badges
                .map((b) => `${b.ok ? "OK" : "FAIL"} ${b.pattern}`)
                .join("   ");
        },
        (msg, allGreen) => {
            banner.textContent = allGreen
                ? `done: ${msg.steps} steps, all constraints held`
                : "done with violations";
        },
        Number(throttle.value));
    throttle.addEventListener("input", () =>
        playback.setFrameMs(Number(throttle.value)));

    const url = `ws://${location.hostname}:8000/session`;
    const channel = await WebSocketChannel.connect(url);
    // sessions live and die with their connection; surface that honestly
    channel.onClose(() => {
        banner.textContent = "session not resumable";
        yesButton.disabled = noButton.disabled = true;
    });
    const client = new SessionClient(channel, {
        onQuestion: (msg) => panel.showQuestion(msg),
        onConceptLearned: (msg) => panel.conceptLearned(msg),
        onPlanFrame: (msg) => playback.push(msg),
        onPlanDone: (msg) => playback.done(msg),
        onError: (msg) => panel.showError(msg),
        onPhase: (phase) => scene.setPhase(phase),
    });
    await client.createSession();
    client.beginDemo("browser_demo",
                     { verb: "move_around", roles: ["A", "B"], modifiers: [] },
                     ROLES, DESCRIPTORS);

    // pointer → drag recording (only while the phase allows it)
    let dragging: { id: string; samples: PointerSample[]; t0: number } | null =
        null;
    canvas.addEventListener("pointerdown", (ev) => {
        if (client.phase !== "recording") return;
        const id = scene.pick(ev.offsetX, ev.offsetY);
        if (id) dragging = { id, samples: [], t0: performance.now() };
    });
    canvas.addEventListener("pointermove", (ev) => {
        if (!dragging) return;
        const w = screenToWorld(transform, ev.offsetX, ev.offsetY);
        dragging.samples.push({
            t: (performance.now() - dragging.t0) / 1000,
            x: w.x,
            y: w.y,
        });
        const objects = scene.frame.objects.map((o) =>
            o.id === dragging!.id
                ? { ...o, pos: [w.x, w.y] as [number, number] }
                : o);
        scene.setFrame({ t: scene.frame.t, objects });
    });
    canvas.addEventListener("pointerup", () => {
        if (!dragging) return;
        const result = recorder.drag(dragging.id, dragging.samples);
        if (result.clamped) banner.textContent = "kept the block on the table";
        dragging = null;
    });

    el<HTMLButtonElement>("finish").addEventListener("click", async () => {
        for (const frame of recorder.finish()) client.sendFrame(frame);
        client.endDemo();
        await client.startMining({ threshold: 0.1 });
    });
    yesButton.addEventListener("click", () => {
        const { id, answer } = panel.answer("yes");
        client.send("answer", { id, answer });
    });
    noButton.addEventListener("click", () => {
        const { id, answer } = panel.answer("no");
        client.send("answer", { id, answer });
    });
    el<HTMLButtonElement>("reenact").addEventListener("click", () => {
        client.reenact(
            { objects: scene.frame.objects },
            ROLES, { rng_seed: 7 }, Number(throttle.value));
    });

    scene.draw();
}

start().catch((err) => {
    document.body.insertAdjacentText("beforeend", String(err));
});
