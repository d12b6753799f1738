import { loadConfig } from "./config";
import { serve } from "./server";

async function main(): Promise<void> {
  const configPath = process.argv[2];
  const config = loadConfig(configPath);
  const server = await serve(config);
  const address = server.address();
  const where =
    typeof address === "object" && address ? `${address.address}:${address.port}` : String(address);
  console.error(`adapter serving the wire protocol on http://${where}`);
}

main().catch((error) => {
  console.error(String(error));
  process.exit(1);
});
