// Wire the panels to one RunModel and start the refresh loop. The server
// address comes from ?api=<origin>, defaulting to the page's own origin.

import { ApiClient } from './api.js';
import { Charts } from './charts.js';
import { ControlPanel } from './dialog.js';
import { Gallery } from './gallery.js';
import { RunModel } from './model.js';
import { Timeline } from './timeline.js';

function panel(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id} in index.html`);
  return el;
}

const params = new URLSearchParams(window.location.search);
const api = new ApiClient(params.get('api') ?? '');
const model = new RunModel(api);

new ControlPanel(panel('controls'), model);
new Timeline(panel('timeline'), model);
new Gallery(panel('gallery'), model);
new Charts(panel('charts'), model);

void model.start();
