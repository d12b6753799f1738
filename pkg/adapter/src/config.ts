/**
 * Adapter configuration: file-based with environment overrides.
 */

import { readFileSync } from "node:fs";
import { z } from "zod";

const configSchema = z.object({
  port: z.number().int().min(0).default(8008),
  host: z.string().default("127.0.0.1"),
  embeddingDim: z.number().int().min(2).default(64),
  seed: z.number().int().default(0),
  maxImageBytes: z
    .number()
    .int()
    .min(1024)
    .default(8 * 1024 * 1024),
});

export type AdapterConfig = z.infer<typeof configSchema>;

export function loadConfig(path?: string, env: NodeJS.ProcessEnv = process.env): AdapterConfig {
  let fromFile: unknown = {};
  if (path) {
    fromFile = JSON.parse(readFileSync(path, "utf-8"));
  }
  const merged = {
    ...(typeof fromFile === "object" && fromFile !== null ? fromFile : {}),
    ...(env.ADAPTER_PORT ? { port: Number(env.ADAPTER_PORT) } : {}),
    ...(env.ADAPTER_HOST ? { host: env.ADAPTER_HOST } : {}),
    ...(env.ADAPTER_DIM ? { embeddingDim: Number(env.ADAPTER_DIM) } : {}),
    ...(env.ADAPTER_SEED ? { seed: Number(env.ADAPTER_SEED) } : {}),
  };
  return configSchema.parse(merged);
}
