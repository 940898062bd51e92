/**
 * Message types of the blockteach session protocol (see docs/protocol.md in
 * the repository root). One JSON object per message; newline-delimited over
 * TCP, one object per text frame over WebSocket.
 */

export const PROTO_VERSION = 1;

export type Phase =
    | "recording"
    | "mining"
    | "teaching"
    | "learned"
    | "reenacting";

export type QuestionStatus =
    | "pending"
    | "asked"
    | "confirmed"
    | "denied"
    | "implied_true"
    | "implied_false";

export interface Envelope {
    proto: number;
    type: string;
    seq: number;
    session?: string;
}

export interface ObjectPoseDoc {
    id: string;
    pos: [number, number];
    yaw?: number;
}

export interface FrameDoc {
    t: number;
    objects: ObjectPoseDoc[];
}

export interface SignatureDoc {
    verb: string;
    roles: string[];
    modifiers?: string[];
}

export interface QueueEntry {
    id: string;
    text: string;
    status: QuestionStatus;
}

export interface SessionCreated extends Envelope {
    type: "session_created";
    session: string;
    phase: Phase;
}

export interface QuestionMessage extends Envelope {
    type: "question";
    id: string;
    text: string;
    pattern: string;
    remaining: number;
    queue: QueueEntry[];
}

export interface ConceptLearned extends Envelope {
    type: "concept_learned";
    concept: {
        signature: SignatureDoc;
        confirmed: string[];
        [key: string]: unknown;
    };
    queue?: QueueEntry[];
    id?: string;
    saved?: boolean;
}

export interface PlanFrame extends Envelope {
    type: "plan_frame";
    index: number;
    frame: FrameDoc;
    audit: Record<string, boolean>;
}

export interface PlanDone extends Envelope {
    type: "plan_done";
    steps: number;
    audit: {
        during: Record<string, boolean>[];
        terminal: Record<string, boolean>;
        progress_revolutions: number;
        expansions: number;
    };
    trace: { frames: FrameDoc[]; [key: string]: unknown };
}

export interface ErrorMessage extends Envelope {
    type: "error";
    rule: string;
    detail: string;
}

export interface WarningMessage extends Envelope {
    type: "warning";
    detail: string;
}

export type ServerMessage =
    | SessionCreated
    | QuestionMessage
    | ConceptLearned
    | PlanFrame
    | PlanDone
    | ErrorMessage
    | WarningMessage;

const SERVER_TYPES = new Set([
    "session_created", "question", "concept_learned",
    "plan_frame", "plan_done", "error", "warning",
]);

export function parseServerMessage(text: string): ServerMessage {
    const msg = JSON.parse(text) as ServerMessage;
    if (typeof msg !== "object" || msg === null || !SERVER_TYPES.has(msg.type)) {
        throw new Error(`not a server message: ${text.slice(0, 80)}`);
    }
    return msg;
}
