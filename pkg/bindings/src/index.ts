/**
 * Node bindings for the tooltrain core: reward scoring, call parsing, AST
 * equality, and group advantage normalization.
 *
 * The core is a Python package; this wrapper spawns a long-lived worker
 * process and speaks line-delimited JSON over its stdio. Values cross the
 * boundary as plain JSON structures only. Requests may be pipelined; the
 * worker answers in order and responses are matched by id.
 */

import { spawn, type ChildProcessWithoutNullStreams } from "node:child_process";
import { existsSync } from "node:fs";
import { createInterface, type Interface } from "node:readline";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

export interface RewardBreakdown {
  format: number;
  general: number;
  strict: number;
  sigma: number;
  tool: number;
  final: number;
  value_errors: number;
  multi_tool_applied: boolean;
}

export interface ToolCallObj {
  name: string;
  args: Record<string, unknown>;
}

export type AnswerSetObj =
  | { calls: ToolCallObj[] }
  | { direct_response: string };

export interface RewardConfigObj {
  kappa?: number;
  midpoint?: number;
  multi_tool_bonus?: number;
  value_error_penalty?: number;
  general_floor?: number;
  strict_clamp_min?: number;
  delimiters?: string;
  format_weight?: number;
  general_reward_scope?: "answer" | "full";
}

export interface AdvantageConfigObj {
  epsilon?: number;
  std_floor?: number;
}

export interface CoreOptions {
  /** Python executable used for the worker (default: python3). */
  pythonPath?: string;
  /** Override the worker script location. */
  workerPath?: string;
}

/** Error raised by the core, carrying the core-side exception name. */
export class CoreError extends Error {
  readonly coreName: string;

  constructor(coreName: string, message: string) {
    super(`${coreName}: ${message}`);
    this.name = "CoreError";
    this.coreName = coreName;
  }
}

interface WireResponse {
  id: number;
  ok: boolean;
  result?: unknown;
  error?: string;
  message?: string;
}

function defaultWorkerPath(): string {
  const here = dirname(fileURLToPath(import.meta.url));
  for (const candidate of [join(here, "..", "worker.py"), join(here, "worker.py")]) {
    if (existsSync(candidate)) return candidate;
  }
  throw new Error("worker.py not found next to the bindings package");
}

export class ToolRewardCore {
  private child: ChildProcessWithoutNullStreams;
  private lines: Interface;
  private pending = new Map<
    number,
    { resolve: (value: unknown) => void; reject: (err: Error) => void }
  >();
  private nextId = 1;
  private closed = false;

  constructor(options: CoreOptions = {}) {
    const python = options.pythonPath ?? "python3";
    const worker = options.workerPath ?? defaultWorkerPath();
    this.child = spawn(python, [worker], { stdio: ["pipe", "pipe", "pipe"] });
    this.lines = createInterface({ input: this.child.stdout });
    this.lines.on("line", (line) => this.onLine(line));
    this.child.on("exit", (code) => {
      if (!this.closed) this.failAll(new Error(`core worker exited with code ${code}`));
    });
    this.child.stderr.on("data", () => {
      /* worker tracebacks surface via failAll on exit */
    });
  }

  private onLine(line: string): void {
    if (!line.trim()) return;
    const response = JSON.parse(line) as WireResponse;
    const entry = this.pending.get(response.id);
    if (!entry) return;
    this.pending.delete(response.id);
    if (response.ok) {
      entry.resolve(response.result);
    } else {
      entry.reject(new CoreError(response.error ?? "Error", response.message ?? ""));
    }
  }

  private failAll(err: Error): void {
    for (const entry of this.pending.values()) entry.reject(err);
    this.pending.clear();
  }

  private call(op: string, args: Record<string, unknown>): Promise<unknown> {
    if (this.closed) return Promise.reject(new Error("bindings already closed"));
    const id = this.nextId++;
    return new Promise((resolve, reject) => {
      this.pending.set(id, { resolve, reject });
      this.child.stdin.write(JSON.stringify({ id, op, args }) + "\n");
    });
  }

  /** Score one raw completion against a ground-truth answer string. */
  computeReward(
    pred: string,
    gtText: string,
    step: number,
    config?: RewardConfigObj,
  ): Promise<RewardBreakdown> {
    return this.call("compute_reward", {
      pred,
      gt_text: gtText,
      step,
      config: config ?? {},
    }) as Promise<RewardBreakdown>;
  }

  /** Elementwise computeReward over equal-length prediction/ground-truth lists. */
  batchRewards(
    preds: string[],
    gtTexts: string[],
    step: number,
    config?: RewardConfigObj,
  ): Promise<RewardBreakdown[]> {
    return this.call("batch_rewards", {
      preds,
      gt_texts: gtTexts,
      step,
      config: config ?? {},
    }) as Promise<RewardBreakdown[]>;
  }

  /** Parse a bracketed call list like `[f(a=1, b="x")]`. */
  parseCallExpression(text: string): Promise<AnswerSetObj> {
    return this.call("parse_call_expression", { text }) as Promise<AnswerSetObj>;
  }

  /** Parse a JSON call object or array of call objects. */
  parseJsonCalls(text: string, lenient = false): Promise<AnswerSetObj> {
    return this.call("parse_json_calls", { text, lenient }) as Promise<AnswerSetObj>;
  }

  /** Structural answer equivalence (argument/call order and 2 == 2.0 ignored). */
  astEqual(a: AnswerSetObj, b: AnswerSetObj): Promise<boolean> {
    return this.call("ast_equal", { a, b }) as Promise<boolean>;
  }

  /** Group-normalized advantages: (r - mean) / population std, zeros below the floor. */
  computeAdvantages(rewards: number[], config?: AdvantageConfigObj): Promise<number[]> {
    return this.call("compute_advantages", {
      rewards,
      config: config ?? {},
    }) as Promise<number[]>;
  }

  close(): void {
    if (this.closed) return;
    this.closed = true;
    this.failAll(new Error("bindings closed"));
    this.child.stdin.end();
    this.child.kill();
  }
}
