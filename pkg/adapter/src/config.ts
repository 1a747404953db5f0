// Adapter configuration: which model backs each stage. Checkpoints are
// loaded (validated) once at startup; a bad configuration refuses to
// start with a diagnostic instead of failing per-request.

import { existsSync, readFileSync } from "node:fs";

import { z } from "zod";

import {
  ImageModel,
  LlmModel,
  StubImage,
  StubLlm,
  StubTts,
  TtsModel,
  UpstreamLlm,
} from "./models";

const llmSchema = z.union([
  z.object({ kind: z.literal("stub") }),
  z.object({
    kind: z.literal("upstream"),
    baseUrl: z.string().url(),
    model: z.string().default("gpt-4o"),
    apiKeyEnv: z.string().default("ADAPTER_UPSTREAM_LLM_KEY"),
  }),
]);

const checkpointSchema = z.object({
  kind: z.literal("stub"),
  // Optional path to checkpoint weights; validated at startup so a
  // missing checkpoint is a startup failure, not a request failure.
  checkpointPath: z.string().optional(),
});

export const configSchema = z.object({
  port: z.number().int().min(0).max(65535).default(8873),
  llm: llmSchema.default({ kind: "stub" }),
  image: checkpointSchema.default({ kind: "stub" }),
  tts: checkpointSchema.default({ kind: "stub" }),
});

export type AdapterConfig = z.infer<typeof configSchema>;

export interface Models {
  llm: LlmModel;
  image: ImageModel;
  tts: TtsModel;
}

export class StartupError extends Error {}

export function loadConfig(path?: string): AdapterConfig {
  if (!path) {
    return configSchema.parse({});
  }
  let raw: string;
  try {
    raw = readFileSync(path, "utf-8");
  } catch (error) {
    throw new StartupError(`cannot read config ${path}: ${(error as Error).message}`);
  }
  const parsed = configSchema.safeParse(JSON.parse(raw));
  if (!parsed.success) {
    throw new StartupError(`invalid config ${path}: ${parsed.error.message}`);
  }
  return parsed.data;
}

export function buildModels(config: AdapterConfig): Models {
  for (const [stage, section] of [
    ["image", config.image],
    ["tts", config.tts],
  ] as const) {
    if (section.checkpointPath && !existsSync(section.checkpointPath)) {
      throw new StartupError(
        `${stage} checkpoint not found: ${section.checkpointPath}`,
      );
    }
  }
  let llm: LlmModel;
  if (config.llm.kind === "stub") {
    llm = new StubLlm();
  } else {
    const apiKey = process.env[config.llm.apiKeyEnv] ?? "";
    if (!apiKey) {
      throw new StartupError(
        `upstream LLM requires environment variable ${config.llm.apiKeyEnv}`,
      );
    }
    llm = new UpstreamLlm(config.llm.baseUrl, config.llm.model, apiKey);
  }
  return { llm, image: new StubImage(), tts: new StubTts() };
}
