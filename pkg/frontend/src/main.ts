// Bootstrap: unidirectional flow. Transport events reduce into the model,
// the view renders the model, interactions produce commands (slider drags
// throttled per control), and every accepted command comes back to us as a
// state-changed event over the socket.

import {
  EditRequest,
  UiModel,
  applyServerEvent,
  initialModel,
  markSent,
  setConnected,
} from "./model.js";
import type { Command } from "./protocol.js";
import { CommandThrottle } from "./throttle.js";
import { PlayerClient } from "./transport.js";
import { View } from "./view.js";

let model: UiModel = initialModel;
const throttle = new CommandThrottle(50);

const client = new PlayerClient(window.location.origin, {
  onEvent(event) {
    model = applyServerEvent(model, event);
    view.render(model);
  },
  onStatus(connected) {
    model = setConnected(model, connected);
    view.render(model);
  },
});

const view = new View(document.getElementById("app")!, {
  send(command: Command) {
    void client.send(command);
  },
  edit(request: EditRequest | null) {
    if (!request) return;
    model = request.model;
    throttle.submit(request.key, () => {
      model = markSent(model, request.key);
      void client.send(request.command);
    });
    view.render(model);
  },
});

view.render(model);
void client.start();
