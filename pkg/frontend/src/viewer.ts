import * as THREE from "three";
import type { MeshData } from "./types.js";

/**
 * Minimal three.js surface viewer with a shared orbit state so that the
 * original/filtered toggle keeps the camera.
 */
export class SurfaceViewer {
    private renderer: THREE.WebGLRenderer;
    private scene = new THREE.Scene();
    private camera: THREE.PerspectiveCamera;
    private mesh: THREE.Mesh | null = null;
    private dragging = false;
    private lastX = 0;
    private lastY = 0;
    theta = 0.6;
    phi = 1.1;
    distance = 3;

    constructor(private canvas: HTMLCanvasElement) {
        this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
        this.camera = new THREE.PerspectiveCamera(45, 1, 0.01, 100);
        this.scene.background = new THREE.Color(0x10141a);
        const key = new THREE.DirectionalLight(0xffffff, 2.2);
        key.position.set(2, 3, 4);
        this.scene.add(key, new THREE.AmbientLight(0x667788, 1.2));
        canvas.addEventListener("pointerdown", (e) => {
            this.dragging = true;
            this.lastX = e.clientX;
            this.lastY = e.clientY;
        });
        window.addEventListener("pointerup", () => (this.dragging = false));
        window.addEventListener("pointermove", (e) => {
            if (!this.dragging) return;
            this.theta += 0.008 * (e.clientX - this.lastX);
            this.phi = Math.min(Math.max(this.phi - 0.008 * (e.clientY - this.lastY), 0.05), Math.PI - 0.05);
            this.lastX = e.clientX;
            this.lastY = e.clientY;
            this.render();
        });
        canvas.addEventListener("wheel", (e) => {
            e.preventDefault();
            this.distance *= Math.exp(0.001 * e.deltaY);
            this.render();
        });
    }

    show(data: MeshData): void {
        const geometry = new THREE.BufferGeometry();
        geometry.setAttribute("position", new THREE.Float32BufferAttribute(Array.from(data.vertices), 3));
        geometry.setIndex(new THREE.Uint32BufferAttribute(Array.from(data.faces), 1));
        geometry.computeVertexNormals();
        geometry.center();
        const material = new THREE.MeshStandardMaterial({
            color: 0x8fb8de, metalness: 0.05, roughness: 0.7, flatShading: true,
        });
        if (this.mesh) {
            this.mesh.geometry.dispose();
            (this.mesh.material as THREE.Material).dispose();
            this.scene.remove(this.mesh);
        }
        this.mesh = new THREE.Mesh(geometry, material);
        this.scene.add(this.mesh);
        this.render();
    }

    render(): void {
        const w = this.canvas.clientWidth || 640;
        const h = this.canvas.clientHeight || 480;
        this.renderer.setSize(w, h, false);
        this.camera.aspect = w / h;
        this.camera.position.set(
            this.distance * Math.sin(this.phi) * Math.cos(this.theta),
            this.distance * Math.cos(this.phi),
            this.distance * Math.sin(this.phi) * Math.sin(this.theta),
        );
        this.camera.lookAt(0, 0, 0);
        this.camera.updateProjectionMatrix();
        this.renderer.render(this.scene, this.camera);
    }
}
