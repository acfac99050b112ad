import { AnnotationClient } from './protocol.js';
import { mountApp } from './ui.js';

const root = document.getElementById('app');
if (root === null) {
  throw new Error('missing #app mount point');
}
mountApp(root, new AnnotationClient(window.location.origin)).catch((failure) => {
  root.textContent = `Startfehler: ${failure}`;
});
