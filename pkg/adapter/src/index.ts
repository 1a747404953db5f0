import { StartupError, buildModels, loadConfig } from "./config";
import { createApp } from "./server";

function main(): void {
  const configPath = process.argv[2] ?? process.env.ADAPTER_CONFIG;
  let config;
  let models;
  try {
    config = loadConfig(configPath);
    models = buildModels(config);
  } catch (error) {
    if (error instanceof StartupError) {
      console.error(`refusing to start: ${error.message}`);
      process.exit(1);
    }
    throw error;
  }
  const app = createApp(models);
  const server = app.listen(config.port, () => {
    const address = server.address();
    const port = typeof address === "object" && address ? address.port : config.port;
    console.log(`adapter listening on :${port}`);
    console.log(`models: llm=${models.llm.id} image=${models.image.id} tts=${models.tts.id}`);
  });
}

main();
