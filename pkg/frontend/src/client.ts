/**
 * Session client: sequencing, phase mirror, and typed dispatch of server
 * messages. All UI components talk to the server through this class.
 */

import { Channel } from "./channel.js";
import {
    ConceptLearned,
    ErrorMessage,
    FrameDoc,
    Phase,
    PlanDone,
    PlanFrame,
    PROTO_VERSION,
    QuestionMessage,
    ServerMessage,
    SignatureDoc,
    WarningMessage,
} from "./protocol.js";

export interface ClientHandlers {
    onQuestion?(msg: QuestionMessage): void;
    onConceptLearned?(msg: ConceptLearned): void;
    onPlanFrame?(msg: PlanFrame): void;
    onPlanDone?(msg: PlanDone): void;
    onError?(msg: ErrorMessage): void;
    onWarning?(msg: WarningMessage): void;
    onPhase?(phase: Phase): void;
}

interface Waiter {
    predicate: (msg: ServerMessage) => boolean;
    resolve: (msg: ServerMessage) => void;
    reject: (err: Error) => void;
    timer: ReturnType<typeof setTimeout>;
}

export class SessionClient {
    session: string | null = null;
    phase: Phase = "recording";
    lastServerSeq = 0;
    private clientSeq = 0;
    private waiters: Waiter[] = [];

    constructor(private channel: Channel,
                private handlers: ClientHandlers = {}) {
        channel.onMessage((msg) => this.dispatch(msg));
    }

    /** Merge additional handlers after construction. */
    on(handlers: ClientHandlers): void {
        this.handlers = { ...this.handlers, ...handlers };
    }

    private setPhase(phase: Phase): void {
        if (phase !== this.phase) {
            this.phase = phase;
            this.handlers.onPhase?.(phase);
        }
    }

    private dispatch(msg: ServerMessage): void {
        // messages must arrive in server sequence order
        if (msg.seq !== this.lastServerSeq + 1) {
            throw new Error(
                `server sequence gap: got ${msg.seq} after ${this.lastServerSeq}`);
        }
        this.lastServerSeq = msg.seq;
        switch (msg.type) {
            case "session_created":
                this.session = msg.session;
                this.setPhase(msg.phase);
                break;
            case "question":
                this.setPhase("teaching");
                this.handlers.onQuestion?.(msg);
                break;
            case "concept_learned":
                this.setPhase("learned");
                this.handlers.onConceptLearned?.(msg);
                break;
            case "plan_frame":
                this.setPhase("reenacting");
                this.handlers.onPlanFrame?.(msg);
                break;
            case "plan_done":
                this.handlers.onPlanDone?.(msg);
                break;
            case "error":
                this.handlers.onError?.(msg);
                break;
            case "warning":
                this.handlers.onWarning?.(msg);
                break;
        }
        for (const waiter of this.waiters.splice(0)) {
            if (waiter.predicate(msg)) {
                clearTimeout(waiter.timer);
                waiter.resolve(msg);
            } else {
                this.waiters.push(waiter);
            }
        }
    }

    /** Next server message matching the predicate (or an error message). */
    waitFor<T extends ServerMessage>(
        predicate: (msg: ServerMessage) => msg is T,
        timeoutMs = 30000,
    ): Promise<T | ErrorMessage> {
        return new Promise((resolve, reject) => {
            const timer = setTimeout(
                () => reject(new Error("timed out waiting for server")),
                timeoutMs);
            this.waiters.push({
                predicate: (m) => predicate(m) || m.type === "error",
                resolve: resolve as (msg: ServerMessage) => void,
                reject,
                timer,
            });
        });
    }

    send(type: string, payload: Record<string, unknown> = {}): void {
        this.clientSeq += 1;
        const msg: Record<string, unknown> = {
            proto: PROTO_VERSION,
            type,
            seq: this.clientSeq,
            ...payload,
        };
        if (this.session !== null) msg.session = this.session;
        this.channel.send(msg);
    }

    createSession(): Promise<ServerMessage> {
        this.send("create_session");
        return this.waitFor(
            (m): m is ServerMessage => m.type === "session_created");
    }

    beginDemo(name: string, signature: SignatureDoc,
              roles: Record<string, string>,
              descriptors: Record<string, string>): void {
        this.send("begin_demo",
                  { name, signature, roles, descriptors,
                    source: "dense_stream" });
    }

    sendFrame(frame: FrameDoc): void {
        this.send("demo_frame", { t: frame.t, objects: frame.objects });
    }

    endDemo(): void {
        this.send("end_demo");
    }

    startMining(miner: Record<string, unknown> = {}):
            Promise<QuestionMessage | ConceptLearned | ErrorMessage> {
        this.send("start_mining", { miner });
        return this.waitFor(
            (m): m is QuestionMessage | ConceptLearned =>
                m.type === "question" || m.type === "concept_learned");
    }

    answer(id: string, answer: "yes" | "no"):
            Promise<QuestionMessage | ConceptLearned | ErrorMessage> {
        this.send("answer", { id, answer });
        return this.waitFor(
            (m): m is QuestionMessage | ConceptLearned =>
                m.type === "question" || m.type === "concept_learned");
    }

    reenact(scene: { objects: object[] }, roles: Record<string, string>,
            config: Record<string, unknown> = {}, throttleMs = 0):
            Promise<PlanDone | ErrorMessage> {
        this.send("reenact_request",
                  { scene, roles, config, throttle_ms: throttleMs });
        return this.waitFor((m): m is PlanDone => m.type === "plan_done");
    }

    close(): void {
        this.channel.close();
    }
}
