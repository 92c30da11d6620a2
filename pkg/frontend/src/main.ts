import { GatewayClient } from "./api";
import { App } from "./app";
import "./style.css";

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app mount point");
  // Same-origin: the gateway serves this bundle and the API.
  const client = new GatewayClient("");
  const listing = await client.registry();
  new App(client, listing.nodes, root);
}

boot().catch((e) => {
  const root = document.getElementById("app");
  if (root) root.textContent = `failed to reach the gateway: ${e}`;
});
