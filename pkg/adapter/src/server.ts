/**
 * HTTP server implementing the inference wire protocol.
 *
 * Endpoints (all POST, JSON): /v1/embed/text, /v1/embed/image, /v1/detect,
 * /v1/generate, plus GET /healthz. Errors are non-2xx with {"error": str}.
 * Requests are stateless; engines are constructed once at startup.
 */

import { existsSync, readFileSync } from "node:fs";
import type { Server } from "node:http";
import express, { Express, Request, Response } from "express";
import { z } from "zod";
import { AdapterConfig } from "./config";
import { Engines, GenerateSegments, ImageDecodeError, buildEngines } from "./engines";

class RequestError extends Error {
  constructor(message: string, readonly status = 400) {
    super(message);
  }
}

const imagePayload = {
  image_b64: z.string().min(1).optional(),
  path: z.string().min(1).optional(),
};

const embedTextSchema = z.object({ text: z.string().min(1) });
const embedImageSchema = z.object(imagePayload);
const detectSchema = z.object({ ...imagePayload, query: z.string().min(1) });
const generateSchema = z.object({
  segments: z
    .array(
      z.union([
        z.object({ type: z.literal("text"), text: z.string().min(1) }),
        z.object({ type: z.literal("image"), ...imagePayload }),
      ]),
    )
    .min(1),
  max_new_tokens: z.number().int().min(1),
  seed: z.number().int().optional(),
});

function resolveImage(body: { image_b64?: string; path?: string }): Buffer {
  if (body.image_b64 !== undefined) {
    const data = Buffer.from(body.image_b64, "base64");
    if (data.length === 0 || data.toString("base64").replace(/=+$/, "") !==
        body.image_b64.replace(/[\r\n]/g, "").replace(/=+$/, "")) {
      throw new RequestError("invalid base64 image payload");
    }
    return data;
  }
  if (body.path !== undefined) {
    if (!existsSync(body.path)) {
      throw new RequestError(`image path does not exist on the server: ${body.path}`);
    }
    return readFileSync(body.path);
  }
  throw new RequestError("image payload needs 'image_b64' or 'path'");
}

function parseBody<T>(schema: z.ZodType<T>, body: unknown): T {
  const result = schema.safeParse(body);
  if (!result.success) {
    const issue = result.error.issues[0];
    const where = issue.path.length ? ` at ${issue.path.join(".")}` : "";
    throw new RequestError(`invalid request${where}: ${issue.message}`);
  }
  return result.data;
}

export function createApp(config: AdapterConfig, engines?: Engines): Express {
  const active =
    engines ??
    buildEngines({
      dim: config.embeddingDim,
      seed: config.seed,
      maxImageBytes: config.maxImageBytes,
    });

  const app = express();
  app.use(express.json({ limit: "32mb" }));

  const handle =
    (fn: (req: Request) => unknown) => (req: Request, res: Response) => {
      try {
        res.status(200).json(fn(req));
      } catch (error) {
        if (error instanceof RequestError) {
          res.status(error.status).json({ error: error.message });
        } else if (error instanceof ImageDecodeError) {
          res.status(400).json({ error: error.message });
        } else {
          res.status(500).json({ error: `internal error: ${String(error)}` });
        }
      }
    };

  app.get("/healthz", (_req, res) => {
    res.status(200).json({
      status: "ok",
      capabilities: {
        text_embedder: true,
        image_embedder: true,
        detector: true,
        generator: true,
      },
      models: active.modelIds,
    });
  });

  app.post(
    "/v1/embed/text",
    handle((req) => {
      const body = parseBody(embedTextSchema, req.body);
      const vector = active.embedText(body.text);
      return { vector, dim: vector.length };
    }),
  );

  app.post(
    "/v1/embed/image",
    handle((req) => {
      const body = parseBody(embedImageSchema, req.body);
      const vector = active.embedImage(resolveImage(body));
      return { vector, dim: vector.length };
    }),
  );

  app.post(
    "/v1/detect",
    handle((req) => {
      const body = parseBody(detectSchema, req.body);
      const detections = active.detect(resolveImage(body), body.query);
      return { detections };
    }),
  );

  app.post(
    "/v1/generate",
    handle((req) => {
      const body = parseBody(generateSchema, req.body);
      const segments: GenerateSegments = { texts: [], images: [] };
      for (const segment of body.segments) {
        if (segment.type === "text") {
          segments.texts.push(segment.text);
        } else {
          segments.images.push(resolveImage(segment));
        }
      }
      return { text: active.generate(segments, body.max_new_tokens, body.seed) };
    }),
  );

  app.use((req, res) => {
    res.status(404).json({ error: `unknown path ${req.path}` });
  });

  // Malformed JSON bodies also surface as protocol-shaped errors.
  app.use(
    (error: Error, _req: Request, res: Response, _next: express.NextFunction) => {
      res.status(400).json({ error: `invalid JSON body: ${error.message}` });
    },
  );

  return app;
}

export function serve(config: AdapterConfig, engines?: Engines): Promise<Server> {
  const app = createApp(config, engines);
  return new Promise((resolve) => {
    const server = app.listen(config.port, config.host, () => resolve(server));
  });
}
